#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "poiact/geo.hpp"
#include "poiact/osm.hpp"
#include "poiact/taxonomy.hpp"

namespace poiact {

// Columnar POI store. Layout (little-endian):
//
//   char[8]  magic "POIACTPS"
//   u32      version (1)
//   f64 x4   bbox min_lat, min_lon, max_lat, max_lon
//   u32      type count T, then T x (u32 length, bytes) POI-type ids
//   u64      POI count N
//   i64[N]   source_id
//   u8[N]    provenance (0 node, 1 way centroid, 2 relation centroid)
//   u32[N]   type index into the table above
//   f64[N]   lat
//   f64[N]   lon
//   u8[N]    closed
//   u64[N+1] shape offsets into the coordinate columns
//   f64[S]   shape lat, then f64[S] shape lon (S = offsets[N])
//
// Types are stored by name so a store written against one taxonomy fails
// loudly when read against another that lacks them.

struct PoiStore {
  static constexpr std::uint32_t kVersion = 1;

  BoundingBox bbox;
  std::vector<Poi> pois;
};

void write_poi_store(std::ostream& out, const PoiStore& store, const TaxonomyGraph& g);
void write_poi_store_file(const std::filesystem::path& path, const PoiStore& store, const TaxonomyGraph& g);

/// Throws BadSnapshot on format errors and UnknownPoiType when a stored type
/// is missing from `g`.
PoiStore read_poi_store(std::istream& in, const TaxonomyGraph& g);
PoiStore read_poi_store_file(const std::filesystem::path& path, const TaxonomyGraph& g);

}  // namespace poiact
