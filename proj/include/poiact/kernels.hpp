#pragma once

#include <span>
#include <string_view>

namespace poiact::kernels {

// Data-parallel inner loops. Each has a scalar reference implementation and,
// where the build and CPU allow, an AVX2 variant; the variant is chosen once
// at first use. Elementwise kernels (distances, axpy) are bit-identical across
// variants; reductions agree to rounding.

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

/// Rectangles as structure-of-arrays, coordinates in meters.
struct RectsSoA {
  std::span<const double> x0;
  std::span<const double> y0;
  std::span<const double> x1;
  std::span<const double> y1;
};

struct KernelTable {
  Isa isa;
  /// out[i] = minimum distance from (px, py) to rect i (0 when inside).
  void (*min_distances)(double px, double py, const RectsSoA& rects, std::span<double> out);
  /// acc[i] += weight * row[i].
  void (*weighted_accumulate)(std::span<const double> row, double weight, std::span<double> acc);
  /// sum_i (sqrt(p[i]) - sqrt(q[i]))^2.
  double (*sqrt_diff_sq_sum)(std::span<const double> p, std::span<const double> q);
  /// sum_i x[i].
  double (*sum)(std::span<const double> x);
};

const KernelTable& scalar_table();
bool isa_available(Isa isa);
const KernelTable& table_for(Isa isa);  // falls back to scalar when unavailable

/// The table in use; honours POIACT_ISA=scalar|avx2 from the environment.
const KernelTable& active();

inline void min_distances(double px, double py, const RectsSoA& rects, std::span<double> out) {
  active().min_distances(px, py, rects, out);
}
inline void weighted_accumulate(std::span<const double> row, double weight, std::span<double> acc) {
  active().weighted_accumulate(row, weight, acc);
}
inline double sqrt_diff_sq_sum(std::span<const double> p, std::span<const double> q) {
  return active().sqrt_diff_sq_sum(p, q);
}
inline double sum(std::span<const double> x) { return active().sum(x); }

}  // namespace poiact::kernels
