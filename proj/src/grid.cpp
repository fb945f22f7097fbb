#include "poiact/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "binio.hpp"
#include "poiact/error.hpp"
#include "poiact/kernels.hpp"

namespace poiact {

void GridConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, "grid config: " + what); };
  if (!(std::isfinite(base_cell_m) && base_cell_m >= 0.001)) fail("base_cell_m must be >= 1 mm");
  if (h_min == 0 || h_min > h_max) fail("need 0 < h_min <= h_max");
  if (!(std::isfinite(r0_m) && r0_m > 0.0)) fail("r0_m must be positive");
  if (!(std::isfinite(r_max_m) && r0_m <= r_max_m)) fail("need r0_m <= r_max_m");
  if (!(std::isfinite(dr_m) && dr_m > 0.0)) fail("dr_m must be positive");
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

RectMm bbox_rect_of(const BoundingBox& bbox, const LocalProjection& proj) {
  const PointM hi = proj.to_local({bbox.max_lat, bbox.max_lon});
  return {0, 0, to_mm(hi.x), to_mm(hi.y)};
}

}  // namespace

GridDims build_base_grid(const BoundingBox& bbox, const GridConfig& cfg) {
  bbox.validate();
  cfg.validate();
  const RectMm r = bbox_rect_of(bbox, LocalProjection(bbox));
  if (r.empty()) throw Error(ErrorCode::kDegenerateBbox, "bbox projects to less than 1 mm");
  const std::int64_t cell = to_mm(cfg.base_cell_m);
  return {static_cast<std::uint32_t>(ceil_div(r.width(), cell)), static_cast<std::uint32_t>(ceil_div(r.height(), cell))};
}

double intersection_weight(double distance_m, double radius_m) {
  if (!(radius_m > 0.0)) return distance_m <= 0.0 ? 1.0 : 0.0;
  return std::clamp(1.0 - distance_m / radius_m, 0.0, 1.0);
}

std::uint32_t Location::count_of(PoiTypeId t) const {
  auto it = std::lower_bound(pois.begin(), pois.end(), t, [](const TypeCount& c, PoiTypeId v) { return c.type < v; });
  return it != pois.end() && it->type == t ? it->count : 0;
}

QuadTree::QuadTree(const BoundingBox& bbox, const GridConfig& cfg)
    : bbox_(bbox), cfg_(cfg), proj_(bbox), dims_(build_base_grid(bbox, cfg)), bbox_rect_(bbox_rect_of(bbox, proj_)),
      cell_mm_(to_mm(cfg.base_cell_m)) {}

std::pair<std::uint32_t, std::uint32_t> QuadTree::cell_of(std::int64_t xm, std::int64_t ym) const {
  // Half-open (lo, hi] cells: a point on a shared edge belongs to the
  // lower/left cell, i.e. the one with the smaller (row, col).
  auto index = [this](std::int64_t v, std::uint32_t n) {
    const std::int64_t i = v <= 0 ? 0 : (v - 1) / cell_mm_;
    return static_cast<std::uint32_t>(std::min<std::int64_t>(i, n - 1));
  };
  return {index(ym, dims_.rows), index(xm, dims_.cols)};
}

namespace {

struct Item {
  std::uint32_t poi;
  std::uint32_t row;
  std::uint32_t col;
  std::int32_t shape;  // index into shapes, -1 for points
};

class Builder {
 public:
  Builder(std::span<const Poi> pois, std::vector<std::vector<PointM>> shapes, const GridConfig& cfg, GridDims dims,
          std::int64_t cell_mm, RectMm bounds)
      : pois_(pois), shapes_(std::move(shapes)), cfg_(cfg), dims_(dims), cell_mm_(cell_mm), bounds_(bounds) {}

  RectMm rect_of(std::uint32_t row, std::uint32_t col, std::uint32_t size) const {
    return {static_cast<std::int64_t>(col) * cell_mm_, static_cast<std::int64_t>(row) * cell_mm_,
            std::min(static_cast<std::int64_t>(col + size) * cell_mm_, bounds_.x1),
            std::min(static_cast<std::int64_t>(row + size) * cell_mm_, bounds_.y1)};
  }

  std::int32_t build(std::uint32_t depth, std::uint32_t row, std::uint32_t col, std::uint32_t size,
                     std::vector<Item> items) {
    const auto index = static_cast<std::int32_t>(nodes.size());
    nodes.push_back({});
    {
      auto& n = nodes.back();
      n.depth = depth;
      n.row = row;
      n.col = col;
      n.size_cells = size;
      n.count = items.size();
    }
    if (items.size() > cfg_.h_max && size > 1) {
      const std::uint32_t half = size / 2;
      int q = 0;
      for (std::uint32_t dr = 0; dr < 2; ++dr) {
        for (std::uint32_t dc = 0; dc < 2; ++dc, ++q) {
          const std::uint32_t r0 = row + dr * half;
          const std::uint32_t c0 = col + dc * half;
          if (r0 >= dims_.rows || c0 >= dims_.cols) continue;
          const RectMm rect = rect_of(r0, c0, half);
          std::vector<Item> sub;
          for (const auto& it : items) {
            const bool inside = it.shape < 0 ? (it.row >= r0 && it.row < r0 + half && it.col >= c0 && it.col < c0 + half)
                                             : shape_intersects_rect(shapes_[it.shape], pois_[it.poi].closed, rect);
            if (inside) sub.push_back(it);
          }
          const auto child = build(depth + 1, r0, c0, half, std::move(sub));
          nodes[index].children[q] = child;
        }
      }
      return index;
    }
    Location loc;
    loc.id = static_cast<LocationId>(leaves.size());
    loc.depth = depth;
    loc.row = row;
    loc.col = col;
    loc.size_cells = size;
    loc.rect = rect_of(row, col, size);
    std::map<PoiTypeId, std::uint32_t> counts;
    for (const auto& it : items) ++counts[pois_[it.poi].poi_type];
    for (const auto& [t, c] : counts) loc.pois.push_back({t, c});
    loc.poi_total = items.size();
    loc.sparse = loc.poi_total < cfg_.h_min;
    nodes[index].leaf = static_cast<std::int32_t>(loc.id);
    leaves.push_back(std::move(loc));
    return index;
  }

  std::vector<QuadTree::Node> nodes;
  std::vector<Location> leaves;

 private:
  std::span<const Poi> pois_;
  std::vector<std::vector<PointM>> shapes_;
  const GridConfig& cfg_;
  GridDims dims_;
  std::int64_t cell_mm_;
  RectMm bounds_;
};

}  // namespace

QuadTree QuadTree::build(const BoundingBox& bbox, std::span<const Poi> pois, const GridConfig& cfg,
                         GridBuildReport* report) {
  cfg.validate();
  QuadTree t(bbox, cfg);
  GridBuildReport rep;
  rep.pois_in = pois.size();

  std::vector<Item> items;
  items.reserve(pois.size());
  std::vector<std::vector<PointM>> shapes;
  for (std::uint32_t i = 0; i < pois.size(); ++i) {
    const Poi& p = pois[i];
    if (p.shape.size() >= 2) {
      std::vector<PointM> shape;
      shape.reserve(p.shape.size());
      for (const auto& c : p.shape) shape.push_back(t.proj_.to_local(c));
      if (!shape_intersects_rect(shape, p.closed, t.bbox_rect_)) {
        ++rep.out_of_bounds;
        continue;
      }
      items.push_back({i, 0, 0, static_cast<std::int32_t>(shapes.size())});
      shapes.push_back(std::move(shape));
      ++rep.way_pois;
    } else {
      if (!bbox.contains(p.point)) {
        ++rep.out_of_bounds;
        continue;
      }
      const PointM m = t.proj_.to_local(p.point);
      const auto [row, col] = t.cell_of(std::clamp(to_mm(m.x), std::int64_t{0}, t.bbox_rect_.x1),
                                        std::clamp(to_mm(m.y), std::int64_t{0}, t.bbox_rect_.y1));
      items.push_back({i, row, col, -1});
    }
  }
  rep.pois_assigned = items.size();

  std::uint32_t root = 1;
  while (root < std::max(t.dims_.cols, t.dims_.rows)) root *= 2;
  Builder b(pois, std::move(shapes), t.cfg_, t.dims_, t.cell_mm_, t.bbox_rect_);
  b.build(0, 0, 0, root, std::move(items));
  t.nodes_ = std::move(b.nodes);
  t.leaves_ = std::move(b.leaves);
  t.finish();
  if (report) *report = rep;
  return t;
}

void QuadTree::finish() {
  const std::size_t n = leaves_.size();
  x0_.resize(n);
  y0_.resize(n);
  x1_.resize(n);
  y1_.resize(n);
  totals_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const RectMm& r = leaves_[i].rect;
    x0_[i] = static_cast<double>(r.x0) * 1e-3;
    y0_[i] = static_cast<double>(r.y0) * 1e-3;
    x1_[i] = static_cast<double>(r.x1) * 1e-3;
    y1_[i] = static_cast<double>(r.y1) * 1e-3;
    totals_[i] = leaves_[i].poi_total;
  }
}

const Location& QuadTree::leaf(LocationId id) const {
  if (id >= leaves_.size()) throw Error(ErrorCode::kOutOfBounds, "no location " + std::to_string(id));
  return leaves_[id];
}

LocationId QuadTree::locate(const PointM& p) const {
  const std::int64_t xm = to_mm(p.x);
  const std::int64_t ym = to_mm(p.y);
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || xm < 0 || ym < 0 || xm > bbox_rect_.x1 || ym > bbox_rect_.y1) {
    throw Error(ErrorCode::kOutOfBounds, "point outside grid bbox");
  }
  const auto [row, col] = cell_of(xm, ym);
  std::int32_t cur = 0;
  while (nodes_[cur].leaf < 0) {
    const Node& n = nodes_[cur];
    const std::uint32_t half = n.size_cells / 2;
    const int q = (row >= n.row + half ? 2 : 0) + (col >= n.col + half ? 1 : 0);
    cur = n.children[q];
  }
  return static_cast<LocationId>(nodes_[cur].leaf);
}

LocationId QuadTree::locate(const LatLon& p) const {
  if (!bbox_.contains(p)) throw Error(ErrorCode::kOutOfBounds, "point outside grid bbox");
  PointM m = proj_.to_local(p);
  m.x = std::clamp(m.x, 0.0, static_cast<double>(bbox_rect_.x1) * 1e-3);
  m.y = std::clamp(m.y, 0.0, static_cast<double>(bbox_rect_.y1) * 1e-3);
  return locate(m);
}

std::optional<LocationId> QuadTree::try_locate(const LatLon& p) const {
  if (!bbox_.contains(p)) return std::nullopt;
  return locate(p);
}

std::vector<double> QuadTree::distances_from(const PointM& p) const {
  std::vector<double> out(leaves_.size());
  kernels::min_distances(p.x, p.y, {x0_, y0_, x1_, y1_}, out);
  return out;
}

NeighborSet QuadTree::aggregation_radius(LocationId l) const { return aggregation_radius_at(leaf(l).centroid(), l); }

NeighborSet QuadTree::aggregation_radius_at(const PointM& p, LocationId center) const {
  const std::vector<double> d = distances_from(p);
  std::vector<std::uint32_t> order(d.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return d[a] != d[b] ? d[a] < d[b] : a < b; });
  std::vector<double> sorted_d(d.size());
  std::vector<std::uint64_t> prefix(d.size() + 1, 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted_d[i] = d[order[i]];
    prefix[i + 1] = prefix[i] + totals_[order[i]];
  }
  auto within = [&](double r) {
    return static_cast<std::size_t>(std::upper_bound(sorted_d.begin(), sorted_d.end(), r) - sorted_d.begin());
  };

  double r = cfg_.r0_m;
  for (std::uint64_t k = 1;; ++k) {
    if (prefix[within(r)] >= cfg_.min_agg_pois || r >= cfg_.r_max_m) break;
    r = std::min(cfg_.r0_m + static_cast<double>(k) * cfg_.dr_m, cfg_.r_max_m);
  }

  NeighborSet ns;
  ns.center = center;
  ns.radius_m = r;
  ns.pois_in_radius = prefix[within(r)];
  for (std::uint32_t i = 0; i < d.size(); ++i) {
    if (d[i] <= r) ns.members.push_back({i, d[i], intersection_weight(d[i], r)});
  }
  return ns;
}

std::vector<LocationId> QuadTree::leaves_in(const BoundingBox& viewport) const {
  const PointM lo = proj_.to_local({viewport.min_lat, viewport.min_lon});
  const PointM hi = proj_.to_local({viewport.max_lat, viewport.max_lon});
  std::vector<LocationId> out;
  for (const auto& l : leaves_) {
    if (x0_[l.id] <= hi.x && lo.x <= x1_[l.id] && y0_[l.id] <= hi.y && lo.y <= y1_[l.id]) out.push_back(l.id);
  }
  return out;
}

std::uint64_t QuadTree::total_count() const {
  return std::accumulate(totals_.begin(), totals_.end(), std::uint64_t{0});
}

// ---------------------------------------------------------------------------
// Snapshot.

namespace {
constexpr char kSnapMagic[9] = "POIACTQT";
}

void QuadTree::write_snapshot(std::ostream& out, const TaxonomyGraph& g) const {
  using binio::put;
  std::map<PoiTypeId, std::uint32_t> index;
  std::vector<PoiTypeId> table;
  for (const auto& l : leaves_) {
    for (const auto& c : l.pois) {
      if (index.emplace(c.type, static_cast<std::uint32_t>(table.size())).second) table.push_back(c.type);
    }
  }
  out.write(kSnapMagic, 8);
  put<std::uint32_t>(out, kSnapshotVersion);
  put(out, bbox_.min_lat);
  put(out, bbox_.min_lon);
  put(out, bbox_.max_lat);
  put(out, bbox_.max_lon);
  put(out, cfg_.base_cell_m);
  put(out, cfg_.h_min);
  put(out, cfg_.h_max);
  put(out, cfg_.r0_m);
  put(out, cfg_.dr_m);
  put(out, cfg_.r_max_m);
  put(out, cfg_.min_agg_pois);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(table.size()));
  for (auto t : table) binio::put_string(out, g.poi_type(t).id);
  put<std::uint64_t>(out, nodes_.size());
  for (const auto& n : nodes_) {
    put(out, n.depth);
    put(out, n.row);
    put(out, n.col);
    put(out, n.size_cells);
    put(out, n.count);
    for (auto c : n.children) put(out, c);
    put(out, n.leaf);
  }
  put<std::uint64_t>(out, leaves_.size());
  for (const auto& l : leaves_) {
    put(out, l.depth);
    put(out, l.row);
    put(out, l.col);
    put(out, l.size_cells);
    put(out, l.rect.x0);
    put(out, l.rect.y0);
    put(out, l.rect.x1);
    put(out, l.rect.y1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.pois.size()));
    for (const auto& c : l.pois) {
      put(out, index.at(c.type));
      put(out, c.count);
    }
    put(out, l.poi_total);
    put<std::uint8_t>(out, l.sparse ? 1 : 0);
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing grid snapshot");
}

QuadTree QuadTree::read_snapshot(std::istream& in, const TaxonomyGraph& g) {
  binio::Reader r(in, ErrorCode::kBadSnapshot);
  r.expect_magic(kSnapMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kSnapshotVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, "grid snapshot version " + std::to_string(version));
  }
  BoundingBox bbox;
  bbox.min_lat = r.get<double>();
  bbox.min_lon = r.get<double>();
  bbox.max_lat = r.get<double>();
  bbox.max_lon = r.get<double>();
  GridConfig cfg;
  cfg.base_cell_m = r.get<double>();
  cfg.h_min = r.get<std::uint32_t>();
  cfg.h_max = r.get<std::uint32_t>();
  cfg.r0_m = r.get<double>();
  cfg.dr_m = r.get<double>();
  cfg.r_max_m = r.get<double>();
  cfg.min_agg_pois = r.get<std::uint32_t>();
  cfg.validate();
  QuadTree t(bbox, cfg);

  const auto nt = r.get<std::uint32_t>();
  std::vector<PoiTypeId> table;
  for (std::uint32_t i = 0; i < nt; ++i) table.push_back(g.poi_type_id(r.get_string()));

  const auto nn = r.get<std::uint64_t>();
  if (nn == 0 || nn > (1u << 28)) throw Error(ErrorCode::kBadSnapshot, "node count out of range");
  t.nodes_.resize(nn);
  for (auto& n : t.nodes_) {
    n.depth = r.get<std::uint32_t>();
    n.row = r.get<std::uint32_t>();
    n.col = r.get<std::uint32_t>();
    n.size_cells = r.get<std::uint32_t>();
    n.count = r.get<std::uint64_t>();
    for (auto& c : n.children) c = r.get<std::int32_t>();
    n.leaf = r.get<std::int32_t>();
  }
  const auto nl = r.get<std::uint64_t>();
  if (nl > nn) throw Error(ErrorCode::kBadSnapshot, "leaf count out of range");
  t.leaves_.resize(nl);
  for (std::uint64_t i = 0; i < nl; ++i) {
    Location& l = t.leaves_[i];
    l.id = static_cast<LocationId>(i);
    l.depth = r.get<std::uint32_t>();
    l.row = r.get<std::uint32_t>();
    l.col = r.get<std::uint32_t>();
    l.size_cells = r.get<std::uint32_t>();
    l.rect.x0 = r.get<std::int64_t>();
    l.rect.y0 = r.get<std::int64_t>();
    l.rect.x1 = r.get<std::int64_t>();
    l.rect.y1 = r.get<std::int64_t>();
    const auto k = r.get<std::uint32_t>();
    for (std::uint32_t j = 0; j < k; ++j) {
      const auto ti = r.get<std::uint32_t>();
      const auto c = r.get<std::uint32_t>();
      if (ti >= table.size()) throw Error(ErrorCode::kBadSnapshot, "type index out of range");
      l.pois.push_back({table[ti], c});
    }
    std::sort(l.pois.begin(), l.pois.end(), [](const TypeCount& a, const TypeCount& b) { return a.type < b.type; });
    l.poi_total = r.get<std::uint64_t>();
    l.sparse = r.get<std::uint8_t>() != 0;
  }
  for (const auto& n : t.nodes_) {
    for (auto c : n.children) {
      if (c >= static_cast<std::int64_t>(nn)) throw Error(ErrorCode::kBadSnapshot, "child index out of range");
    }
    if (n.leaf >= static_cast<std::int64_t>(nl)) throw Error(ErrorCode::kBadSnapshot, "leaf index out of range");
  }
  t.finish();
  return t;
}

void QuadTree::write_snapshot_file(const std::filesystem::path& path, const TaxonomyGraph& g) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_snapshot(out, g);
}

QuadTree QuadTree::read_snapshot_file(const std::filesystem::path& path, const TaxonomyGraph& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_snapshot(in, g);
}

}  // namespace poiact

namespace poiact {

GridCheck check_grid(const QuadTree& tree) {
  GridCheck out;
  auto fail = [&](std::string msg) {
    if (out.violations.size() < 50) out.violations.push_back(std::move(msg));
  };
  const GridDims dims = tree.base_dims();
  const RectMm box = tree.bbox_rect();
  const std::int64_t cell = tree.cell_mm();
  std::vector<std::uint8_t> cover(static_cast<std::size_t>(dims.rows) * dims.cols, 0);
  __int128 area = 0;
  const auto& cfg = tree.config();
  for (const auto& l : tree.leaves()) {
    const std::string tag = "leaf " + std::to_string(l.id);
    const RectMm expect{static_cast<std::int64_t>(l.col) * cell, static_cast<std::int64_t>(l.row) * cell,
                        std::min(static_cast<std::int64_t>(l.col + l.size_cells) * cell, box.x1),
                        std::min(static_cast<std::int64_t>(l.row + l.size_cells) * cell, box.y1)};
    if (l.rect.empty() || !(l.rect == expect)) fail(tag + ": rect does not match its quad-tree address");
    area += l.rect.area_mm2();
    for (std::uint32_t r = l.row; r < std::min(l.row + l.size_cells, dims.rows); ++r) {
      for (std::uint32_t c = l.col; c < std::min(l.col + l.size_cells, dims.cols); ++c) {
        auto& v = cover[static_cast<std::size_t>(r) * dims.cols + c];
        if (v) fail(tag + ": overlaps another leaf at cell (" + std::to_string(r) + "," + std::to_string(c) + ")");
        v = 1;
      }
    }
    std::uint64_t sum = 0;
    for (const auto& tc : l.pois) sum += tc.count;
    if (sum != l.poi_total) fail(tag + ": poi_total differs from the sum of type counts");
    if (l.poi_total > cfg.h_max && l.size_cells != 1) fail(tag + ": more than h_max POIs above base-cell size");
    if (l.sparse != (l.poi_total < cfg.h_min)) fail(tag + ": sparse flag inconsistent with h_min");
  }
  for (std::size_t i = 0; i < cover.size(); ++i) {
    if (!cover[i]) {
      fail("gap at cell (" + std::to_string(i / dims.cols) + "," + std::to_string(i % dims.cols) + ")");
      break;
    }
  }
  if (area != box.area_mm2()) fail("leaf areas do not sum to the bbox area");
  for (const auto& n : tree.nodes()) {
    if (n.leaf >= 0) continue;
    const std::uint32_t half = n.size_cells / 2;
    int q = 0;
    for (std::uint32_t dr = 0; dr < 2; ++dr) {
      for (std::uint32_t dc = 0; dc < 2; ++dc, ++q) {
        const bool inside = n.row + dr * half < dims.rows && n.col + dc * half < dims.cols;
        if (inside != (n.children[q] >= 0)) fail("internal node at depth " + std::to_string(n.depth) + ": bad children");
      }
    }
  }
  return out;
}

}  // namespace poiact
