#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "poiact/evaluation.hpp"
#include "poiact/geo.hpp"
#include "poiact/grid.hpp"
#include "poiact/osm.hpp"
#include "poiact/taxonomy.hpp"

namespace poiact::fixture {

std::filesystem::path data_dir();
const TaxonomyGraph& seed_taxonomy();

/// Fresh, empty scratch directory under the build tree.
std::filesystem::path scratch_dir(std::string_view name);

/// Portable uniform double in [0,1) from a 64-bit draw.
double unit(std::uint64_t bits);

inline const LatLon kTrento{46.07, 11.12};

Poi point_poi(const TaxonomyGraph& g, std::string_view type, const LatLon& p, std::int64_t id);

struct City {
  BoundingBox bbox;
  std::vector<Poi> pois;
};

/// Clustered POIs over a width x height box: a few dense themed districts on
/// a uniform background, so the quad-tree gets both deep and sparse regions.
City synthetic_city(const TaxonomyGraph& g, std::size_t n, std::uint64_t seed, double width_m = 6000.0,
                    double height_m = 5000.0);

/// The hostel / trees / bus-stop location of the worked example plus seven
/// 1 km neighbours that give the IDF something to contrast against.
struct HostelFixture {
  BoundingBox bbox;
  GridConfig cfg;
  std::vector<Poi> pois;
  LatLon probe;  // inside the example location
};
HostelFixture hostel_fixture(const TaxonomyGraph& g);

struct OsmGenOptions {
  std::uint64_t nodes = 1000;
  std::uint64_t ways = 100;
  std::uint64_t relations = 10;
  double typed_node_fraction = 0.1;
  double typed_way_fraction = 0.3;
  double outside_fraction = 0.02;  // nodes placed outside the bbox
  std::uint64_t seed = 7;
  BoundingBox bbox = BoundingBox::from_extent(kTrento, 4000.0, 3000.0);
};

/// Writes OSM XML with one tag per line, nodes first, then ways, then
/// relations. Typed elements carry exactly one type-bearing tag.
void write_synthetic_osm(std::ostream& out, const OsmGenOptions& opt);

/// POS terminals drawn leaf by leaf from the POI activity mix, with every
/// activity under `boosted_top` given `boost` times its weight first.
std::vector<PosTerminal> biased_terminals(const TaxonomyGraph& g, const QuadTree& tree, const LocationModel& model,
                                          ActivityId boosted_top, double boost, std::size_t per_leaf,
                                          std::uint64_t seed);

}  // namespace poiact::fixture
