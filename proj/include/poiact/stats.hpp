#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace poiact {

/// Silverman's rule of thumb: 0.9 * min(sd, IQR/1.34) * n^(-1/5).
double silverman_bandwidth(std::span<const double> values);

/// Mode of a Gaussian kernel density estimate with Silverman bandwidth,
/// located on a 2001-point grid spanning [min - 3h, max + 3h].
double kde_mode(std::span<const double> values);

struct LogisticFit {
  double location = 0.0;
  double scale = 0.0;
};

/// Maximum-likelihood logistic fit (alternating 1-D solves of the score
/// equations). A constant sample yields scale 0.
LogisticFit logistic_fit(std::span<const double> values);

double mean_of(std::span<const double> values);
double quantile(std::vector<double> values, double q);

/// Draws min(k, n) distinct indices from [0, n) with a partial Fisher-Yates
/// shuffle driven by mt19937_64; the same seed gives the same draw on every
/// platform (no std distributions involved).
std::vector<std::uint32_t> sample_indices(std::uint32_t n, std::uint32_t k, std::uint64_t seed);

}  // namespace poiact
