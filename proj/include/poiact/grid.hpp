#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poiact/geo.hpp"
#include "poiact/osm.hpp"
#include "poiact/taxonomy.hpp"

namespace poiact {

struct GridConfig {
  double base_cell_m = 50.0;
  std::uint32_t h_min = 10;
  std::uint32_t h_max = 20;
  double r0_m = 100.0;
  double dr_m = 25.0;
  double r_max_m = 3000.0;
  std::uint32_t min_agg_pois = 50;

  /// Throws InvalidArgument unless 0 < h_min <= h_max, 0 < r0 <= r_max, dr > 0
  /// and the base cell is at least 1 mm.
  void validate() const;

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct GridDims {
  std::uint32_t cols = 0;
  std::uint32_t rows = 0;

  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// cols = ceil(width / base_cell_m), rows = ceil(height / base_cell_m), with
/// the extent rounded to whole millimetres first so that a 20.05 km side is
/// exactly 401 cells rather than 402 after projection round-off.
GridDims build_base_grid(const BoundingBox& bbox, const GridConfig& cfg);

using LocationId = std::uint32_t;

struct TypeCount {
  PoiTypeId type{};
  std::uint32_t count = 0;

  friend bool operator==(const TypeCount&, const TypeCount&) = default;
};

/// A quad-tree leaf. `rect` is the node square clipped to the bbox; `row`,
/// `col` and `size_cells` address the unclipped node in base cells.
struct Location {
  LocationId id = 0;
  std::uint32_t depth = 0;
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::uint32_t size_cells = 0;
  RectMm rect;
  std::vector<TypeCount> pois;  // sorted by type
  std::uint64_t poi_total = 0;
  bool sparse = false;

  PointM centroid() const { return rect.center_m(); }
  std::uint32_t count_of(PoiTypeId t) const;

  friend bool operator==(const Location&, const Location&) = default;
};

struct Neighbor {
  LocationId id = 0;
  double distance_m = 0.0;
  double lambda = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct NeighborSet {
  LocationId center = 0;
  double radius_m = 0.0;
  std::uint64_t pois_in_radius = 0;
  std::vector<Neighbor> members;  // ordered by id
};

/// λ = 1 - d/r, clamped to [0,1].
double intersection_weight(double distance_m, double radius_m);

struct GridBuildReport {
  std::uint64_t pois_in = 0;
  std::uint64_t pois_assigned = 0;
  std::uint64_t out_of_bounds = 0;
  std::uint64_t way_pois = 0;  // assigned by shape intersection
};

class QuadTree {
 public:
  struct Node {
    std::uint32_t depth = 0;
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    std::uint32_t size_cells = 0;
    std::uint64_t count = 0;
    std::int32_t children[4] = {-1, -1, -1, -1};  // (row,col) order; -1 outside the bbox
    std::int32_t leaf = -1;

    friend bool operator==(const Node&, const Node&) = default;
  };

  /// Builds the base grid, assigns POIs and repartitions top-down: a node is
  /// split iff its POI count exceeds h_max and it is larger than one base cell.
  /// The root is the smallest power-of-two square of base cells covering the
  /// grid, anchored at the south-west corner. Point POIs go to exactly one leaf
  /// (boundary points belong to the lower/left cell); way POIs count once in
  /// every leaf their geometry touches.
  static QuadTree build(const BoundingBox& bbox, std::span<const Poi> pois, const GridConfig& cfg = {},
                        GridBuildReport* report = nullptr);

  const BoundingBox& bbox() const { return bbox_; }
  const GridConfig& config() const { return cfg_; }
  const LocalProjection& projection() const { return proj_; }
  GridDims base_dims() const { return dims_; }
  RectMm bbox_rect() const { return bbox_rect_; }
  std::int64_t cell_mm() const { return cell_mm_; }

  std::span<const Location> leaves() const { return leaves_; }
  const Location& leaf(LocationId id) const;
  std::span<const Node> nodes() const { return nodes_; }

  /// Leaf containing the point; throws OutOfBounds outside the bbox.
  LocationId locate(const LatLon& p) const;
  LocationId locate(const PointM& p) const;
  std::optional<LocationId> try_locate(const LatLon& p) const;

  /// Minimum distance from `p` to every leaf, in leaf order.
  std::vector<double> distances_from(const PointM& p) const;

  /// Expanding-radius neighborhood around the leaf centroid.
  NeighborSet aggregation_radius(LocationId l) const;
  /// Same rule around an arbitrary point.
  NeighborSet aggregation_radius_at(const PointM& p, LocationId center) const;

  /// Leaves meeting a lat/lon viewport (closed intersection).
  std::vector<LocationId> leaves_in(const BoundingBox& viewport) const;

  std::uint64_t total_count() const;

  friend bool operator==(const QuadTree& a, const QuadTree& b) {
    return a.bbox_ == b.bbox_ && a.cfg_ == b.cfg_ && a.nodes_ == b.nodes_ && a.leaves_ == b.leaves_;
  }

  // Versioned binary snapshot; types stored by name.
  void write_snapshot(std::ostream& out, const TaxonomyGraph& g) const;
  static QuadTree read_snapshot(std::istream& in, const TaxonomyGraph& g);
  void write_snapshot_file(const std::filesystem::path& path, const TaxonomyGraph& g) const;
  static QuadTree read_snapshot_file(const std::filesystem::path& path, const TaxonomyGraph& g);

  static constexpr std::uint32_t kSnapshotVersion = 1;

 private:
  QuadTree(const BoundingBox& bbox, const GridConfig& cfg);
  void finish();  // derived leaf geometry arrays

  std::pair<std::uint32_t, std::uint32_t> cell_of(std::int64_t xm, std::int64_t ym) const;

  BoundingBox bbox_;
  GridConfig cfg_;
  LocalProjection proj_;
  GridDims dims_;
  RectMm bbox_rect_;
  std::int64_t cell_mm_ = 0;
  std::vector<Node> nodes_;
  std::vector<Location> leaves_;
  // Leaf rects in meters, structure-of-arrays for the distance kernel.
  std::vector<double> x0_, y0_, x1_, y1_;
  std::vector<std::uint64_t> totals_;
};

struct GridCheck {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Structural invariants: leaves tile the bbox exactly (every base cell
/// covered once, areas summing to the bbox area in mm^2), per-leaf totals
/// match their type counts, every leaf holds at most h_max POIs or is a
/// single base cell, sparse flags agree with h_min, and each internal node
/// has its in-bbox children.
GridCheck check_grid(const QuadTree& tree);

}  // namespace poiact
