#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "kernels_internal.hpp"

namespace poiact::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void min_distances_avx2(double px, double py, const RectsSoA& rects, std::span<double> out) {
  const std::size_t n = out.size();
  const __m256d vpx = _mm256_set1_pd(px);
  const __m256d vpy = _mm256_set1_pd(py);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x0 = _mm256_loadu_pd(rects.x0.data() + i);
    const __m256d x1 = _mm256_loadu_pd(rects.x1.data() + i);
    const __m256d y0 = _mm256_loadu_pd(rects.y0.data() + i);
    const __m256d y1 = _mm256_loadu_pd(rects.y1.data() + i);
    const __m256d dx = _mm256_max_pd(_mm256_max_pd(_mm256_sub_pd(x0, vpx), zero), _mm256_sub_pd(vpx, x1));
    const __m256d dy = _mm256_max_pd(_mm256_max_pd(_mm256_sub_pd(y0, vpy), zero), _mm256_sub_pd(vpy, y1));
    const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    _mm256_storeu_pd(out.data() + i, _mm256_sqrt_pd(d2));
  }
  for (; i < n; ++i) {
    const double dx = std::max(std::max(rects.x0[i] - px, 0.0), px - rects.x1[i]);
    const double dy = std::max(std::max(rects.y0[i] - py, 0.0), py - rects.y1[i]);
    out[i] = std::sqrt(dx * dx + dy * dy);
  }
}

void weighted_accumulate_avx2(std::span<const double> row, double weight, std::span<double> acc) {
  const std::size_t n = acc.size();
  const __m256d w = _mm256_set1_pd(weight);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_loadu_pd(row.data() + i);
    const __m256d a = _mm256_loadu_pd(acc.data() + i);
    _mm256_storeu_pd(acc.data() + i, _mm256_add_pd(a, _mm256_mul_pd(w, r)));
  }
  for (; i < n; ++i) acc[i] += weight * row[i];
}

double sqrt_diff_sq_sum_avx2(std::span<const double> p, std::span<const double> q) {
  const std::size_t n = p.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_sqrt_pd(_mm256_loadu_pd(p.data() + i)),
                                    _mm256_sqrt_pd(_mm256_loadu_pd(q.data() + i)));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
    s += d * d;
  }
  return s;
}

double sum_avx2(std::span<const double> x) {
  const std::size_t n = x.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x.data() + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

}  // namespace poiact::kernels::detail
