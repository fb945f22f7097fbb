#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace poiact {

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const LatLon&, const LatLon&) = default;
};

/// Geographic bounding box in degrees. Projected extents use the local
/// equirectangular projection anchored at the box center.
struct BoundingBox {
  double min_lat = 0.0;
  double min_lon = 0.0;
  double max_lat = 0.0;
  double max_lon = 0.0;

  /// Throws DegenerateBbox unless min < max on both axes and all values lie
  /// in the valid lat/lon ranges.
  void validate() const;

  bool contains(const LatLon& p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
  }

  LatLon center() const { return {(min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0}; }

  double width_m() const;
  double height_m() const;

  /// Box centered on `center` whose projected extent is width_m x height_m.
  static BoundingBox from_extent(const LatLon& center, double width_m, double height_m);

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Planar point in meters, origin at the bbox south-west corner.
struct PointM {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr double kEarthRadiusM = 6371008.8;

class LocalProjection {
 public:
  explicit LocalProjection(const BoundingBox& bbox);

  PointM to_local(const LatLon& p) const;
  LatLon to_latlon(const PointM& p) const;

  double meters_per_deg_lat() const { return m_per_deg_lat_; }
  double meters_per_deg_lon() const { return m_per_deg_lon_; }

 private:
  double origin_lat_;
  double origin_lon_;
  double m_per_deg_lat_;
  double m_per_deg_lon_;
};

/// Axis-aligned rectangle in integer millimetres. Integer coordinates make
/// tiling checks exact.
struct RectMm {
  std::int64_t x0 = 0;
  std::int64_t y0 = 0;
  std::int64_t x1 = 0;
  std::int64_t y1 = 0;

  std::int64_t width() const { return x1 - x0; }
  std::int64_t height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  /// Exact area in mm^2, as 128-bit to survive city-scale extents.
  __int128 area_mm2() const { return static_cast<__int128>(width()) * height(); }
  double area_m2() const { return static_cast<double>(width()) * 1e-3 * static_cast<double>(height()) * 1e-3; }

  bool contains_closed(const PointM& p) const;
  bool overlaps(const RectMm& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
  PointM center_m() const {
    return {(static_cast<double>(x0) + static_cast<double>(x1)) * 0.5e-3,
            (static_cast<double>(y0) + static_cast<double>(y1)) * 0.5e-3};
  }

  friend bool operator==(const RectMm&, const RectMm&) = default;
};

inline std::int64_t to_mm(double meters) {
  return static_cast<std::int64_t>(meters * 1000.0 + (meters >= 0 ? 0.5 : -0.5));
}

/// Minimum Euclidean distance in meters from `p` to the closed rectangle; 0 inside.
double min_distance_m(const PointM& p, const RectMm& r);

/// Closed segment vs closed rectangle (touching counts).
bool segment_intersects_rect(const PointM& a, const PointM& b, const RectMm& r);

/// Ray-casting test; points on the boundary may land on either side.
bool point_in_polygon(const PointM& p, std::span<const PointM> ring);

double polygon_area_m2(std::span<const PointM> ring);

/// Area of ring ∩ rect, by Sutherland-Hodgman clipping (the rect is convex;
/// the ring may be concave, which clipping against a convex window handles).
double clipped_area_m2(std::span<const PointM> ring, const RectMm& rect);

/// Whether a polyline (open) or polygon ring (closed) touches the rect.
bool shape_intersects_rect(std::span<const PointM> shape, bool closed, const RectMm& rect);

PointM centroid_of(std::span<const PointM> pts);
LatLon centroid_of(std::span<const LatLon> pts);

}  // namespace poiact
