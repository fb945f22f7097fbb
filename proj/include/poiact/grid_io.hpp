#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "poiact/grid.hpp"

namespace poiact {

/// Aggregation radius of every leaf, in leaf order.
std::vector<double> leaf_radii(const QuadTree& tree);

/// GeoJSON FeatureCollection of leaf polygons with properties
/// {id, poi_total, sparse, radius_m}. `radii` is indexed by leaf id.
nlohmann::json grid_geojson(const QuadTree& tree, std::span<const LocationId> ids, std::span<const double> radii);
nlohmann::json grid_geojson(const QuadTree& tree);

/// Closed lon/lat ring of a leaf rectangle (SW, SE, NE, NW, SW).
nlohmann::json leaf_ring(const QuadTree& tree, const Location& l);

}  // namespace poiact
