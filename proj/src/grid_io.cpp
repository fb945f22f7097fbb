#include "poiact/grid_io.hpp"

namespace poiact {

std::vector<double> leaf_radii(const QuadTree& tree) {
  std::vector<double> out;
  out.reserve(tree.leaves().size());
  for (const auto& l : tree.leaves()) out.push_back(tree.aggregation_radius(l.id).radius_m);
  return out;
}

nlohmann::json leaf_ring(const QuadTree& tree, const Location& l) {
  const double x0 = static_cast<double>(l.rect.x0) * 1e-3;
  const double y0 = static_cast<double>(l.rect.y0) * 1e-3;
  const double x1 = static_cast<double>(l.rect.x1) * 1e-3;
  const double y1 = static_cast<double>(l.rect.y1) * 1e-3;
  nlohmann::json ring = nlohmann::json::array();
  for (const PointM& p : {PointM{x0, y0}, PointM{x1, y0}, PointM{x1, y1}, PointM{x0, y1}, PointM{x0, y0}}) {
    const LatLon ll = tree.projection().to_latlon(p);
    ring.push_back({ll.lon, ll.lat});
  }
  return ring;
}

nlohmann::json grid_geojson(const QuadTree& tree, std::span<const LocationId> ids, std::span<const double> radii) {
  nlohmann::json features = nlohmann::json::array();
  for (auto id : ids) {
    const Location& l = tree.leaf(id);
    features.push_back({
        {"type", "Feature"},
        {"id", l.id},
        {"geometry", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({leaf_ring(tree, l)})}}},
        {"properties",
         {{"id", l.id}, {"poi_total", l.poi_total}, {"sparse", l.sparse}, {"radius_m", radii[id]}, {"depth", l.depth}}},
    });
  }
  return {{"type", "FeatureCollection"}, {"poiact_format", "grid"}, {"version", 1}, {"features", std::move(features)}};
}

nlohmann::json grid_geojson(const QuadTree& tree) {
  std::vector<LocationId> ids(tree.leaves().size());
  for (LocationId i = 0; i < ids.size(); ++i) ids[i] = i;
  const auto radii = leaf_radii(tree);
  return grid_geojson(tree, ids, radii);
}

}  // namespace poiact
