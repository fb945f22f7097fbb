#include "poiact/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace poiact {

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

double silverman_bandwidth(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> copy(values.begin(), values.end());
  const double iqr = quantile(copy, 0.75) - quantile(copy, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

double kde_mode(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double h = silverman_bandwidth(values);
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (!(h > 0.0)) return *mn;
  constexpr int kGrid = 2001;
  const double lo = *mn - 3.0 * h;
  const double hi = *mx + 3.0 * h;
  double best_x = lo;
  double best_f = -1.0;
  for (int i = 0; i < kGrid; ++i) {
    const double x = lo + (hi - lo) * i / (kGrid - 1);
    double f = 0.0;
    for (double v : values) {
      const double z = (x - v) / h;
      f += std::exp(-0.5 * z * z);
    }
    if (f > best_f) {
      best_f = f;
      best_x = x;
    }
  }
  return best_x;
}

namespace {

template <class F>
double bisect(F f, double lo, double hi) {
  // f is decreasing on [lo, hi].
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

LogisticFit logistic_fit(std::span<const double> values) {
  LogisticFit fit;
  if (values.empty()) return fit;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (*mn == *mx) {
    fit.location = *mn;
    return fit;
  }
  const double n = static_cast<double>(values.size());
  double mu = quantile({values.begin(), values.end()}, 0.5);
  double ss = 0.0;
  const double m = mean_of(values);
  for (double v : values) ss += (v - m) * (v - m);
  double s = std::max(std::sqrt(ss / n) * std::sqrt(3.0) / std::numbers::pi, 1e-12);

  for (int iter = 0; iter < 100; ++iter) {
    const double prev_mu = mu;
    const double prev_s = s;
    // d/dmu: sum tanh((x - mu) / 2s) = 0, decreasing in mu.
    mu = bisect(
        [&](double u) {
          double acc = 0.0;
          for (double v : values) acc += std::tanh((v - u) / (2.0 * s));
          return acc;
        },
        *mn, *mx);
    // d/ds: sum z tanh(z/2) = n with z = (x - mu)/s, decreasing in s.
    const double span = *mx - *mn;
    const double log_s = bisect(
        [&](double ls) {
          const double sc = std::exp(ls);
          double acc = 0.0;
          for (double v : values) {
            const double z = (v - mu) / sc;
            acc += z * std::tanh(z / 2.0);
          }
          return acc - n;
        },
        std::log(span) - 40.0, std::log(span) + 5.0);
    s = std::exp(log_s);
    if (std::abs(mu - prev_mu) <= 1e-14 * std::max(1.0, std::abs(mu)) && std::abs(s - prev_s) <= 1e-14 * s) break;
  }
  fit.location = mu;
  fit.scale = s;
  return fit;
}

std::vector<std::uint32_t> sample_indices(std::uint32_t n, std::uint32_t k, std::uint64_t seed) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::mt19937_64 rng(seed);
  const std::uint32_t m = std::min(n, k);
  for (std::uint32_t i = 0; i < m; ++i) {
    // Unbiased bounded draw by rejection; mt19937_64 output is fully specified.
    const std::uint64_t range = static_cast<std::uint64_t>(n - i);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(idx[i], idx[i + static_cast<std::uint32_t>(r % range)]);
  }
  idx.resize(m);
  return idx;
}

}  // namespace poiact
