#include "mopg/montecarlo.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "mopg/rng.hpp"
#include "test_util.hpp"

namespace {

TEST(RngStream, DeterministicPerSeedAndStream) {
  mopg::RngStream a(42, 7);
  mopg::RngStream b(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());

  mopg::RngStream c(42, 8);
  int differing = 0;
  mopg::RngStream a2(42, 7);
  for (int i = 0; i < 100; ++i) {
    if (a2.next_u64() != c.next_u64()) ++differing;
  }
  EXPECT_GT(differing, 90);
}

TEST(RngStream, UniformsPassKolmogorovSmirnov) {
  mopg::RngStream rng(123);
  std::vector<double> u(10000);
  for (auto& x : u) x = rng.uniform();
  const double d = testutil::ks_statistic(
      u, [](double x) { return std::clamp(x, 0.0, 1.0); });
  EXPECT_LT(d, testutil::ks_critical(0.01, 10000.0));
}

TEST(RngStream, NormalsMatchStandardMoments) {
  mopg::RngStream rng(456);
  const int n = 40000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(RngStream, NormalsPassKolmogorovSmirnov) {
  mopg::RngStream rng(790);
  std::vector<double> z(10000);
  for (auto& x : z) x = rng.normal();
  const double d = testutil::ks_statistic(z, testutil::normal_cdf);
  EXPECT_LT(d, testutil::ks_critical(0.01, 10000.0));
}

TEST(ImportanceEstimate, ProposalEqualsIntegrand) {
  const auto est = mopg::importance_estimate(
      [](double) { return 1.0; },
      [](mopg::RngStream& rng) { return rng.normal(); }, 1000, 5);
  EXPECT_EQ(est.value, 1.0);
  EXPECT_EQ(est.std_error, 0.0);
  EXPECT_EQ(est.n, 1000);
  EXPECT_EQ(est.seed, 5u);
}

TEST(ImportanceEstimate, ConstantScaleIsExact) {
  const double lambda = 0.37;
  const auto est = mopg::importance_estimate(
      [&](double) { return lambda; },
      [](mopg::RngStream& rng) { return rng.uniform(); }, 200, 6);
  EXPECT_NEAR(est.value, lambda, 1e-15);
  // The two-pass-free second-moment formula leaves cancellation noise.
  EXPECT_NEAR(est.std_error, 0.0, 1e-8 * lambda);
}

double correction_ratio(const std::array<double, 3>& r) {
  const double s = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
  return 1.0 / ((1.0 + s) * (1.0 + s));
}

std::array<double, 3> normal3(mopg::RngStream& rng) {
  return {rng.normal(), rng.normal(), rng.normal()};
}

TEST(ImportanceEstimate, CorrectionWeightIntegralMatchesQuadrature) {
  // E[1/(1+||r||^2)^2] for r ~ N(0, I3), against the radial chi-square(3)
  // quadrature oracle.
  const double oracle = testutil::radial_expectation(
      [](double s) { return 1.0 / ((1.0 + s) * (1.0 + s)); }, 1.0);
  const auto est =
      mopg::importance_estimate(correction_ratio, normal3, 50000, 7);
  EXPECT_LT(std::abs(est.value - oracle), 3.0 * est.std_error);
}

TEST(ImportanceEstimate, UnbiasedAcrossSeeds) {
  const double oracle = testutil::radial_expectation(
      [](double s) { return 1.0 / ((1.0 + s) * (1.0 + s)); }, 1.0);
  double sum = 0.0;
  double var_sum = 0.0;
  const int runs = 100;
  for (int k = 0; k < runs; ++k) {
    const auto est = mopg::importance_estimate(
        correction_ratio, normal3, 2000, 1000 + static_cast<std::uint64_t>(k));
    sum += est.value;
    var_sum += est.std_error * est.std_error;
  }
  const double pooled_se = std::sqrt(var_sum) / runs;
  EXPECT_LT(std::abs(sum / runs - oracle), 3.0 * pooled_se);
}

TEST(ImportanceEstimate, RejectsBadInputs) {
  EXPECT_THROW(mopg::importance_estimate([](double) { return 1.0; },
                                         [](mopg::RngStream&) { return 0.0; },
                                         0, 1),
               mopg::ValidationError);
  EXPECT_THROW(
      mopg::importance_estimate(
          [](double) { return std::numeric_limits<double>::quiet_NaN(); },
          [](mopg::RngStream& rng) { return rng.uniform(); }, 10, 1),
      mopg::NumericError);
}

TEST(ErrorEstimate, HandComputedCases) {
  const std::vector<double> constant{2.0, 2.0, 2.0};
  EXPECT_EQ(mopg::error_estimate(constant, 1.0), 0.0);

  const std::vector<double> split{0.0, 2.0};
  EXPECT_NEAR(mopg::error_estimate(split, 1.0), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(mopg::error_estimate(split, 3.0), 3.0 * std::sqrt(0.5), 1e-15);

  const std::vector<double> single{1.0};
  EXPECT_THROW(mopg::error_estimate(single, 1.0), mopg::ValidationError);
}

TEST(ErrorEstimate, InverseSqrtNScaling) {
  // log(err) against log(N) has slope -1/2.
  std::vector<double> log_n, log_err;
  for (const std::int64_t n : {1000, 3163, 10000, 31627, 100000}) {
    const auto est = mopg::importance_estimate(correction_ratio, normal3, n, 99);
    log_n.push_back(std::log(static_cast<double>(n)));
    log_err.push_back(std::log(est.std_error));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < log_n.size(); ++i) {
    mx += log_n[i];
    my += log_err[i];
  }
  mx /= log_n.size();
  my /= log_n.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < log_n.size(); ++i) {
    sxy += (log_n[i] - mx) * (log_err[i] - my);
    sxx += (log_n[i] - mx) * (log_n[i] - mx);
  }
  EXPECT_NEAR(sxy / sxx, -0.5, 0.1);
}

}  // namespace
