#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "mopg/errors.hpp"
#include "mopg/rng.hpp"

namespace mopg {

/// Result of a Monte Carlo integral estimate.
struct McEstimate {
  double value = 0.0;
  std::int64_t n = 0;
  double sample_variance = 0.0;  // population variance of the ratio samples
  double std_error = 0.0;        // sqrt(sample_variance / n)
  std::uint64_t seed = 0;
};

/// Importance-sampled integral estimate: draws n points from the proposal
/// and averages the integrand-over-proposal ratios. Unbiased whenever the
/// proposal is positive wherever the integrand is nonzero.
///
/// `ratio` maps a sampled point to g(x)/f(x); `sampler` maps an RngStream to
/// a sampled point. Deterministic given the seed.
template <typename Ratio, typename Sampler>
McEstimate importance_estimate(Ratio&& ratio, Sampler&& sampler,
                               std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("importance_estimate: n must be >= 1");
  RngStream rng(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto x = sampler(rng);
    const double y = ratio(x);
    if (!std::isfinite(y)) {
      throw NumericError("importance_estimate: non-finite ratio at sample " +
                         std::to_string(i));
    }
    sum += y;
    sum_sq += y * y;
  }
  McEstimate est;
  est.value = sum / static_cast<double>(n);
  est.n = n;
  est.sample_variance =
      std::max(0.0, sum_sq / static_cast<double>(n) - est.value * est.value);
  est.std_error = std::sqrt(est.sample_variance / static_cast<double>(n));
  est.seed = seed;
  return est;
}

/// err = M_A * sqrt((mean(Y^2) - mean(Y)^2) / N) for ratio samples Y.
inline double error_estimate(std::span<const double> values,
                             double region_mass) {
  const std::size_t n = values.size();
  if (n < 2) throw ValidationError("error_estimate: need at least 2 values");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double y : values) {
    sum += y;
    sum_sq += y * y;
  }
  const double mean = sum / static_cast<double>(n);
  const double second = sum_sq / static_cast<double>(n);
  const double var = std::max(0.0, second - mean * mean);
  return region_mass * std::sqrt(var / static_cast<double>(n));
}

}  // namespace mopg
