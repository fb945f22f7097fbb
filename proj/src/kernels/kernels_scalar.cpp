#include <algorithm>
#include <cmath>

#include "kernels_internal.hpp"

namespace poiact::kernels::detail {

void min_distances_scalar(double px, double py, const RectsSoA& rects, std::span<double> out) {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::max(std::max(rects.x0[i] - px, 0.0), px - rects.x1[i]);
    const double dy = std::max(std::max(rects.y0[i] - py, 0.0), py - rects.y1[i]);
    out[i] = std::sqrt(dx * dx + dy * dy);
  }
}

void weighted_accumulate_scalar(std::span<const double> row, double weight, std::span<double> acc) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += weight * row[i];
}

double sqrt_diff_sq_sum_scalar(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
    s += d * d;
  }
  return s;
}

double sum_scalar(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

}  // namespace poiact::kernels::detail
