#pragma once

#include "poiact/kernels.hpp"

namespace poiact::kernels::detail {

void min_distances_scalar(double px, double py, const RectsSoA& rects, std::span<double> out);
void weighted_accumulate_scalar(std::span<const double> row, double weight, std::span<double> acc);
double sqrt_diff_sq_sum_scalar(std::span<const double> p, std::span<const double> q);
double sum_scalar(std::span<const double> x);

#if defined(POIACT_HAVE_AVX2)
void min_distances_avx2(double px, double py, const RectsSoA& rects, std::span<double> out);
void weighted_accumulate_avx2(std::span<const double> row, double weight, std::span<double> acc);
double sqrt_diff_sq_sum_avx2(std::span<const double> p, std::span<const double> q);
double sum_avx2(std::span<const double> x);
#endif

}  // namespace poiact::kernels::detail
