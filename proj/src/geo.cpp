#include "poiact/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "poiact/error.hpp"

namespace poiact {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMetersPerDegLat = kEarthRadiusM * kDegToRad;

double meters_per_deg_lon_at(double lat) { return kMetersPerDegLat * std::cos(lat * kDegToRad); }

}  // namespace

void BoundingBox::validate() const {
  const bool finite = std::isfinite(min_lat) && std::isfinite(max_lat) && std::isfinite(min_lon) &&
                      std::isfinite(max_lon);
  if (!finite || !(min_lat < max_lat) || !(min_lon < max_lon) || min_lat < -90.0 || max_lat > 90.0 ||
      min_lon < -180.0 || max_lon > 180.0) {
    throw Error(ErrorCode::kDegenerateBbox, "bbox must satisfy min < max within lat/lon ranges");
  }
}

double BoundingBox::width_m() const {
  return (max_lon - min_lon) * meters_per_deg_lon_at(center().lat);
}

double BoundingBox::height_m() const { return (max_lat - min_lat) * kMetersPerDegLat; }

BoundingBox BoundingBox::from_extent(const LatLon& center, double width_m, double height_m) {
  const double half_lat = height_m / kMetersPerDegLat / 2.0;
  const double half_lon = width_m / meters_per_deg_lon_at(center.lat) / 2.0;
  return {center.lat - half_lat, center.lon - half_lon, center.lat + half_lat, center.lon + half_lon};
}

LocalProjection::LocalProjection(const BoundingBox& bbox)
    : origin_lat_(bbox.min_lat),
      origin_lon_(bbox.min_lon),
      m_per_deg_lat_(kMetersPerDegLat),
      m_per_deg_lon_(meters_per_deg_lon_at(bbox.center().lat)) {}

PointM LocalProjection::to_local(const LatLon& p) const {
  return {(p.lon - origin_lon_) * m_per_deg_lon_, (p.lat - origin_lat_) * m_per_deg_lat_};
}

LatLon LocalProjection::to_latlon(const PointM& p) const {
  return {origin_lat_ + p.y / m_per_deg_lat_, origin_lon_ + p.x / m_per_deg_lon_};
}

bool RectMm::contains_closed(const PointM& p) const {
  return p.x * 1000.0 >= static_cast<double>(x0) && p.x * 1000.0 <= static_cast<double>(x1) &&
         p.y * 1000.0 >= static_cast<double>(y0) && p.y * 1000.0 <= static_cast<double>(y1);
}

double min_distance_m(const PointM& p, const RectMm& r) {
  const double x0 = static_cast<double>(r.x0) * 1e-3;
  const double x1 = static_cast<double>(r.x1) * 1e-3;
  const double y0 = static_cast<double>(r.y0) * 1e-3;
  const double y1 = static_cast<double>(r.y1) * 1e-3;
  const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
  const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
  return std::sqrt(dx * dx + dy * dy);
}

bool segment_intersects_rect(const PointM& a, const PointM& b, const RectMm& r) {
  // Liang-Barsky parametric clip.
  const double xmin = static_cast<double>(r.x0) * 1e-3;
  const double xmax = static_cast<double>(r.x1) * 1e-3;
  const double ymin = static_cast<double>(r.y0) * 1e-3;
  const double ymax = static_cast<double>(r.y1) * 1e-3;
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  double t0 = 0.0;
  double t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - xmin, xmax - a.x, a.y - ymin, ymax - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      if (t > t1) return false;
      t0 = std::max(t0, t);
    } else {
      if (t < t0) return false;
      t1 = std::min(t1, t);
    }
  }
  return t0 <= t1;
}

bool point_in_polygon(const PointM& p, std::span<const PointM> ring) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const PointM& a = ring[i];
    const PointM& b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

double polygon_area_m2(std::span<const PointM> ring) {
  double twice = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const PointM& a = ring[i];
    const PointM& b = ring[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice) / 2.0;
}

double clipped_area_m2(std::span<const PointM> ring, const RectMm& rect) {
  std::vector<PointM> poly(ring.begin(), ring.end());
  if (poly.size() >= 2 && poly.front().x == poly.back().x && poly.front().y == poly.back().y) {
    poly.pop_back();
  }
  const double bounds[4] = {static_cast<double>(rect.x0) * 1e-3, static_cast<double>(rect.x1) * 1e-3,
                            static_cast<double>(rect.y0) * 1e-3, static_cast<double>(rect.y1) * 1e-3};
  std::vector<PointM> out;
  for (int edge = 0; edge < 4 && !poly.empty(); ++edge) {
    auto inside = [&](const PointM& p) {
      switch (edge) {
        case 0: return p.x >= bounds[0];
        case 1: return p.x <= bounds[1];
        case 2: return p.y >= bounds[2];
        default: return p.y <= bounds[3];
      }
    };
    auto cross = [&](const PointM& a, const PointM& b) {
      if (edge < 2) {
        const double x = bounds[edge];
        const double t = (x - a.x) / (b.x - a.x);
        return PointM{x, a.y + t * (b.y - a.y)};
      }
      const double y = bounds[edge];
      const double t = (y - a.y) / (b.y - a.y);
      return PointM{a.x + t * (b.x - a.x), y};
    };
    out.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const PointM& cur = poly[i];
      const PointM& prev = poly[(i + poly.size() - 1) % poly.size()];
      const bool cin = inside(cur);
      const bool pin = inside(prev);
      if (cin) {
        if (!pin) out.push_back(cross(prev, cur));
        out.push_back(cur);
      } else if (pin) {
        out.push_back(cross(prev, cur));
      }
    }
    poly.swap(out);
  }
  return poly.size() < 3 ? 0.0 : polygon_area_m2(poly);
}

bool shape_intersects_rect(std::span<const PointM> shape, bool closed, const RectMm& rect) {
  if (shape.empty()) return false;
  if (shape.size() == 1) return rect.contains_closed(shape[0]);
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) {
    if (segment_intersects_rect(shape[i], shape[i + 1], rect)) return true;
  }
  if (closed) {
    if (segment_intersects_rect(shape.back(), shape.front(), rect)) return true;
    // Rect entirely inside the polygon.
    if (point_in_polygon(rect.center_m(), shape)) return true;
  }
  return false;
}

PointM centroid_of(std::span<const PointM> pts) {
  PointM c;
  if (pts.empty()) return c;
  for (const auto& p : pts) {
    c.x += p.x;
    c.y += p.y;
  }
  c.x /= static_cast<double>(pts.size());
  c.y /= static_cast<double>(pts.size());
  return c;
}

LatLon centroid_of(std::span<const LatLon> pts) {
  LatLon c;
  if (pts.empty()) return c;
  for (const auto& p : pts) {
    c.lat += p.lat;
    c.lon += p.lon;
  }
  c.lat /= static_cast<double>(pts.size());
  c.lon /= static_cast<double>(pts.size());
  return c;
}

}  // namespace poiact
