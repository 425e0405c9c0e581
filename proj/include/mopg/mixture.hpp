#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mopg/errors.hpp"
#include "mopg/montecarlo.hpp"
#include "mopg/projected_gaussian.hpp"

namespace mopg {

struct WeightedElement {
  ProjectedGaussian element;
  double weight = 0.0;
};

/// Weighted mixture of projected Gaussians. Weights lie in [0, 1] and sum to
/// one within 1e-9; the sequence is never empty.
class Mixture {
 public:
  explicit Mixture(std::vector<WeightedElement> elements)
      : elements_(std::move(elements)) {
    if (elements_.empty()) throw ValidationError("Mixture: no elements");
    double sum = 0.0;
    for (const auto& we : elements_) {
      if (!(we.weight >= 0.0) || we.weight > 1.0 + 1e-12) {
        throw ValidationError("Mixture: weight outside [0, 1]");
      }
      sum += we.weight;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("Mixture: weights sum to " + std::to_string(sum));
    }
  }

  static Mixture single(ProjectedGaussian pg) {
    std::vector<WeightedElement> v;
    v.push_back({std::move(pg), 1.0});
    return Mixture(std::move(v));
  }

  std::size_t size() const { return elements_.size(); }
  const WeightedElement& operator[](std::size_t i) const { return elements_[i]; }
  const std::vector<WeightedElement>& elements() const { return elements_; }
  auto begin() const { return elements_.begin(); }
  auto end() const { return elements_.end(); }

 private:
  std::vector<WeightedElement> elements_;
};

inline double density(const Mixture& m, const Vector7d& q) {
  if (std::abs(q.head<4>().norm() - 1.0) > kUnitNormTol) {
    throw ValidationError("density: sphere part is not unit-norm");
  }
  double sum = 0.0;
  for (const auto& we : m) sum += we.weight * DensityEvaluator(we.element)(q);
  return sum;
}

/// Tangent-point compatibility weight used when fusing mixtures. The default
/// form squares the dot product inside the arccos; the variant squares the
/// angle itself instead.
enum class AlphaForm { kSquaredDot, kSquaredAngle };

inline double alpha_weight(const Vector4d& qi, const Vector4d& qj,
                           AlphaForm form = AlphaForm::kSquaredDot) {
  const double dot = std::clamp(qi.dot(qj), -1.0, 1.0);
  if (form == AlphaForm::kSquaredDot) {
    return std::exp(-5.0 * std::acos(std::clamp(dot * dot, -1.0, 1.0)));
  }
  const double angle = std::acos(dot);
  return std::exp(-5.0 * angle * angle);
}

struct FuseConfig {
  AlphaForm alpha_form = AlphaForm::kSquaredDot;
  bool recenter = true;
  std::int64_t mass_samples = kDefaultMassSamples;
  std::uint64_t seed = 0;
};

/// Pairwise Bayesian fusion of two mixtures. Every element of m1 is fused
/// with every element of m2; candidate weights are
///   lambda_i * lambda_j * alpha_ij * delta_ij / mass_ij
/// renormalized to one. Pairs whose re-expression hits a chart equator
/// contribute nothing.
inline Mixture fuse_mixtures(const Mixture& m1, const Mixture& m2,
                             const FuseConfig& cfg = {}) {
  std::vector<WeightedElement> fused;
  fused.reserve(m1.size() * m2.size());
  std::uint64_t pair_index = 0;
  for (const auto& a : m1) {
    for (const auto& b : m2) {
      const std::uint64_t pair_seed = derive_seed(cfg.seed, pair_index++);
      try {
        ProjectedGaussian f = fuse(a.element, b.element, cfg.recenter,
                                   cfg.mass_samples, pair_seed);
        const double alpha = alpha_weight(a.element.ts.point,
                                          b.element.ts.point, cfg.alpha_form);
        const double w =
            a.weight * b.weight * alpha * f.compat / f.mass;
        fused.push_back({std::move(f), w});
      } catch (const ProjectionAtInfinity&) {
        // Incompatible pair; it carries zero fused weight.
      }
    }
  }
  double sum = 0.0;
  for (const auto& we : fused) sum += we.weight;
  if (fused.empty() || !(sum > 1e-200)) {
    throw NumericError("fuse_mixtures: all candidate weights vanish");
  }
  for (auto& we : fused) we.weight /= sum;
  return Mixture(std::move(fused));
}

struct PrunePolicy {
  enum class Kind { kByThreshold, kToCount };
  Kind kind = Kind::kByThreshold;
  double threshold = 0.0;
  std::size_t count = 1;

  static PrunePolicy by_threshold(double t) {
    return {Kind::kByThreshold, t, 1};
  }
  static PrunePolicy to_count(std::size_t k) {
    return {Kind::kToCount, 0.0, k};
  }
};

struct PruneResult {
  Mixture mixture;
  double dropped_weight = 0.0;
  /// Bound on the box-probability change: 2 * dropped_weight.
  double bound = 0.0;
};

/// Removes the lowest-weight elements (threshold or target count policy) and
/// renormalizes the survivors by 1/(1 - dropped weight).
inline PruneResult prune(const Mixture& m, const PrunePolicy& policy) {
  const std::size_t n = m.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Drop order: lowest weight first; on ties the later element goes first.
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (m[i].weight != m[j].weight) return m[i].weight < m[j].weight;
    return i > j;
  });

  std::size_t n_drop = 0;
  if (policy.kind == PrunePolicy::Kind::kToCount) {
    if (policy.count < 1) throw ValidationError("prune: target count < 1");
    n_drop = n > policy.count ? n - policy.count : 0;
  } else {
    while (n_drop < n && m[order[n_drop]].weight < policy.threshold) ++n_drop;
    if (n_drop == n) {
      throw ValidationError("prune: policy would drop every element");
    }
  }

  std::vector<bool> dropped(n, false);
  double dropped_weight = 0.0;
  for (std::size_t k = 0; k < n_drop; ++k) {
    dropped[order[k]] = true;
    dropped_weight += m[order[k]].weight;
  }
  const double keep = 1.0 - dropped_weight;
  if (!(keep > 0.0)) throw NumericError("prune: surviving weight is zero");
  std::vector<WeightedElement> survivors;
  survivors.reserve(n - n_drop);
  for (std::size_t i = 0; i < n; ++i) {
    if (!dropped[i]) survivors.push_back({m[i].element, m[i].weight / keep});
  }
  return PruneResult{Mixture(std::move(survivors)), dropped_weight,
                     2.0 * dropped_weight};
}

/// B_s(i, j) for two weighted elements after re-expressing both on their
/// midpoint chart. Returns +inf when the re-expression is not possible.
inline double pairwise_merge_bound(const ProjectedGaussian& a, double lambda_a,
                                   const ProjectedGaussian& b,
                                   double lambda_b) {
  try {
    const TangentSpace mid = midpoint_chart(a.ts.point, b.ts.point);
    const auto [mu1, s1] = reexpress_moments(a.ts, a.mean, a.cov, mid);
    const auto [mu2, s2] = reexpress_moments(b.ts, b.mean, b.cov, mid);
    return skl_merge_bound(GaussianKernel(mu1, s1), GaussianKernel(mu2, s2),
                           lambda_a, lambda_b);
  } catch (const ProjectionAtInfinity&) {
    return std::numeric_limits<double>::infinity();
  }
}

struct ReduceStep {
  std::size_t i = 0;
  std::size_t j = 0;
  double bound = 0.0;
};

/// Greedy sKL-bound reduction: repeatedly merges the pair with the smallest
/// B_s until `target_count` components remain. Ties within 1e-12 resolve to
/// the lexicographically smallest pair. The chosen bounds are reported
/// through `steps` when given.
inline Mixture reduce_by_merging(const Mixture& m, std::size_t target_count,
                                 std::int64_t mass_samples = kDefaultMassSamples,
                                 std::uint64_t seed = 0,
                                 std::vector<ReduceStep>* steps = nullptr) {
  if (target_count < 1) throw ValidationError("reduce_by_merging: target < 1");
  if (m.size() <= target_count) return m;
  std::vector<WeightedElement> work(m.elements());
  std::uint64_t step_counter = 0;
  while (work.size() > target_count) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i + 1 < work.size(); ++i) {
      for (std::size_t j = i + 1; j < work.size(); ++j) {
        const double bs = pairwise_merge_bound(work[i].element, work[i].weight,
                                               work[j].element, work[j].weight);
        if (bs < best - 1e-12) {
          best = bs;
          bi = i;
          bj = j;
        }
      }
    }
    if (!std::isfinite(best)) {
      throw NumericError("reduce_by_merging: no mergeable pair");
    }
    ProjectedGaussian merged =
        merge(work[bi].element, work[bj].element, work[bi].weight,
              work[bj].weight, /*recenter=*/false, mass_samples,
              derive_seed(seed, step_counter));
    const double weight = work[bi].weight + work[bj].weight;
    if (steps) steps->push_back({bi, bj, best});
    work.erase(work.begin() + static_cast<std::ptrdiff_t>(bj));
    work.erase(work.begin() + static_cast<std::ptrdiff_t>(bi));
    work.push_back({std::move(merged), weight});
    ++step_counter;
  }
  return Mixture(std::move(work));
}

/// Pairwise composition of a pose mixture with a motion mixture. The output
/// weights are the renormalized products lambda_i * lambda_j; no
/// compatibility factors apply because the distributions are independent.
inline Mixture compose_mixtures(const Mixture& m_pose, const Mixture& m_motion,
                                std::int64_t mass_samples = kDefaultMassSamples,
                                std::uint64_t seed = 0) {
  std::vector<WeightedElement> out;
  out.reserve(m_pose.size() * m_motion.size());
  std::uint64_t pair_index = 0;
  double sum = 0.0;
  for (const auto& p : m_pose) {
    for (const auto& mo : m_motion) {
      ProjectedGaussian composed =
          compose(p.element, mo.element, mass_samples,
                  derive_seed(seed, pair_index++));
      const double w = p.weight * mo.weight;
      sum += w;
      out.push_back({std::move(composed), w});
    }
  }
  for (auto& we : out) we.weight /= sum;
  return Mixture(std::move(out));
}

struct MixtureSample {
  Vector7d pose;
  std::size_t component = 0;
};

/// Categorical draw over the weights followed by a kernel draw, projected to
/// the sphere. Deterministic given the seed.
inline std::vector<MixtureSample> sample_mixture(const Mixture& m,
                                                 std::int64_t n,
                                                 std::uint64_t seed) {
  if (n < 0) throw ValidationError("sample_mixture: n must be >= 0");
  std::vector<GaussianSampler> samplers;
  samplers.reserve(m.size());
  for (const auto& we : m) {
    samplers.emplace_back(we.element.mean, we.element.cov);
  }
  RngStream rng(seed);
  std::vector<MixtureSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < n; ++t) {
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t k = m.size() - 1;
    for (std::size_t i = 0; i < m.size(); ++i) {
      cum += m[i].weight;
      if (u < cum) {
        k = i;
        break;
      }
    }
    out.push_back(
        {tangent_to_sphere(m[k].element.ts, samplers[k].draw(rng)), k});
  }
  return out;
}

namespace detail {

/// Chart Gaussian of one proposal component plus its sampler.
struct ProposalComponent {
  TangentSpace ts;
  Vector6d mean;
  Eigen::LLT<Matrix6d> llt;
  double log_norm;
  GaussianSampler sampler;

  explicit ProposalComponent(const ProjectedGaussian& pg)
      : ts(pg.ts), mean(pg.mean), llt(pg.cov), log_norm(0.0),
        sampler(pg.mean, pg.cov) {
    if (llt.info() != Eigen::Success) {
      throw NumericError("l2_distance_sq: proposal covariance not PD");
    }
    log_norm = -3.0 * std::log(kTwoPi);
    for (int i = 0; i < 6; ++i) log_norm -= std::log(llt.matrixL()(i, i));
  }

  /// Chart-Gaussian density over the sphere measure: phi(r)/ (2 w(r)),
  /// antipodally symmetrized; zero inside the equator band.
  double sphere_density(const Vector7d& q) const {
    Vector6d x;
    try {
      x = sphere_to_tangent(ts, q);
    } catch (const ProjectionAtInfinity&) {
      return 0.0;
    }
    const Vector6d diff = x - mean;
    const double quad = llt.matrixL().solve(diff).squaredNorm();
    return std::exp(log_norm - 0.5 * quad) /
           (2.0 * correction_weight(x.head<3>()));
  }
};

/// Content ordering so that the proposal in l2_distance_sq does not depend
/// on the argument order.
inline bool mixture_content_less(const Mixture& a, const Mixture& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    auto cmp = [](double u, double v) { return u < v ? -1 : (u > v ? 1 : 0); };
    if (int c = cmp(x.weight, y.weight)) return c < 0;
    for (int k = 0; k < 4; ++k) {
      if (int c = cmp(x.element.ts.point(k), y.element.ts.point(k))) return c < 0;
    }
    for (int k = 0; k < 6; ++k) {
      if (int c = cmp(x.element.mean(k), y.element.mean(k))) return c < 0;
    }
    for (int r = 0; r < 6; ++r) {
      for (int col = 0; col < 6; ++col) {
        if (int c = cmp(x.element.cov(r, col), y.element.cov(r, col))) {
          return c < 0;
        }
      }
    }
    if (int c = cmp(x.element.mass, y.element.mass)) return c < 0;
  }
  return false;
}

}  // namespace detail

/// Importance-sampled estimate of the squared L2 distance
/// integral (p1 - p2)^2 over S3 x R3. The proposal is the equal-weight union
/// of the chart Gaussians of all components of both mixtures, which covers
/// both supports; its components are ordered content-canonically so the
/// estimate is symmetric in (m1, m2) for a fixed seed.
inline McEstimate l2_distance_sq(const Mixture& m1, const Mixture& m2,
                                 std::int64_t n, std::uint64_t seed) {
  const Mixture& first = detail::mixture_content_less(m2, m1) ? m2 : m1;
  const Mixture& second = (&first == &m1) ? m2 : m1;
  std::vector<detail::ProposalComponent> proposal;
  proposal.reserve(m1.size() + m2.size());
  for (const auto& we : first) proposal.emplace_back(we.element);
  for (const auto& we : second) proposal.emplace_back(we.element);

  std::vector<DensityEvaluator> eval1, eval2;
  std::vector<double> w1, w2;
  for (const auto& we : m1) {
    eval1.emplace_back(we.element);
    w1.push_back(we.weight);
  }
  for (const auto& we : m2) {
    eval2.emplace_back(we.element);
    w2.push_back(we.weight);
  }

  const double k_inv = 1.0 / static_cast<double>(proposal.size());
  const auto sampler = [&](RngStream& rng) -> Vector7d {
    const double u = rng.uniform();
    auto k = std::min<std::size_t>(
        proposal.size() - 1,
        static_cast<std::size_t>(u * static_cast<double>(proposal.size())));
    return tangent_to_sphere(proposal[k].ts, proposal[k].sampler.draw(rng));
  };
  const auto ratio = [&](const Vector7d& q) -> double {
    double p1 = 0.0, p2 = 0.0;
    for (std::size_t i = 0; i < eval1.size(); ++i) p1 += w1[i] * eval1[i](q);
    for (std::size_t i = 0; i < eval2.size(); ++i) p2 += w2[i] * eval2[i](q);
    double f = 0.0;
    for (const auto& pc : proposal) f += k_inv * pc.sphere_density(q);
    const double diff = p1 - p2;
    return diff * diff / f;
  };
  return importance_estimate(ratio, sampler, n, seed);
}

/// Fresh Monte Carlo estimate of the total integral of the mixture density.
/// Each element contributes weight * E[w]/mass; values near one confirm the
/// normalization bookkeeping.
inline McEstimate mixture_mass(const Mixture& m, std::int64_t n,
                               std::uint64_t seed) {
  if (n < 1) throw ValidationError("mixture_mass: n must be >= 1");
  double value = 0.0;
  double var = 0.0;
  std::uint64_t idx = 0;
  for (const auto& we : m) {
    GaussianSampler sampler(we.element.mean, we.element.cov);
    const double stored = we.element.mass;
    const auto est = importance_estimate(
        [&](const Eigen::VectorXd& x) {
          return correction_weight(x.head<3>()) / stored;
        },
        [&](RngStream& rng) { return sampler.draw(rng); }, n,
        derive_seed(seed, idx++));
    value += we.weight * est.value;
    var += we.weight * we.weight * est.std_error * est.std_error;
  }
  McEstimate out;
  out.value = value;
  out.n = n * static_cast<std::int64_t>(m.size());
  out.std_error = std::sqrt(var);
  out.sample_variance = var * static_cast<double>(out.n);
  out.seed = seed;
  return out;
}

struct EmConfig {
  int max_iterations = 100;
  /// Relative log-likelihood increment below which iteration stops.
  double min_increment = 1e-6;
  /// Added to every estimated covariance as eps * I, keeping it invertible.
  double eig_floor_eps = 0.0;
  std::uint64_t seed = 0;
};

struct EmResult {
  Mixture mixture;
  std::vector<double> log_likelihood;
};

/// Components whose effective sample count falls below this are dropped.
inline constexpr double kEmStarvationFloor = 1e-8;

namespace detail {

struct EmComponent {
  TangentSpace ts;
  Vector6d mean;
  Matrix6d cov;
  double weight;
};

/// Per-sample, per-component weighted kernel values and chart coordinates.
/// finite[j][k] is false when sample j sits in component k's equator band.
///
/// The EM objective evaluates each component as the chart Gaussian at the
/// reprojected sample, lambda_k * phi(x_hat_jk; mu_k, Sigma_k): with fixed
/// charts the weighted-moment M step is the exact maximizer of the expected
/// complete-data log likelihood for this family, which is what makes the
/// iteration monotone. The projected-density mass normalizer stays out of
/// the EM objective and is estimated once for the returned elements.
struct EmEvaluation {
  Eigen::MatrixXd dens;               // N x K, lambda_k * phi_k(x_hat_jk)
  std::vector<std::vector<Vector6d>> chart;  // [k][j]
  std::vector<std::vector<bool>> finite;     // [k][j]
  double log_likelihood = 0.0;
};

inline EmEvaluation em_evaluate(const std::vector<EmComponent>& comps,
                                const std::vector<Vector7d>& samples) {
  const std::size_t n = samples.size();
  const std::size_t k = comps.size();
  EmEvaluation ev;
  ev.dens.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  ev.chart.assign(k, std::vector<Vector6d>(n, Vector6d::Zero()));
  ev.finite.assign(k, std::vector<bool>(n, false));
  for (std::size_t c = 0; c < k; ++c) {
    Eigen::LLT<Matrix6d> llt(comps[c].cov);
    if (llt.info() != Eigen::Success) {
      throw NumericError("em_fit: component covariance not positive definite");
    }
    double log_norm = -3.0 * std::log(kTwoPi);
    for (int i = 0; i < 6; ++i) log_norm -= std::log(llt.matrixL()(i, i));
    const double log_lambda = std::log(comps[c].weight);
    for (std::size_t j = 0; j < n; ++j) {
      double value = 0.0;
      try {
        const Vector6d x = sphere_to_tangent(comps[c].ts, samples[j]);
        ev.chart[c][j] = x;
        ev.finite[c][j] = true;
        const Vector6d diff = x - comps[c].mean;
        const double quad = llt.matrixL().solve(diff).squaredNorm();
        value = std::exp(log_lambda + log_norm - 0.5 * quad);
      } catch (const ProjectionAtInfinity&) {
        value = 0.0;
      }
      ev.dens(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) =
          value;
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double row = ev.dens.row(static_cast<Eigen::Index>(j)).sum();
    if (!(row > 0.0)) {
      throw NumericError("em_fit: sample " + std::to_string(j) +
                         " has zero density under every component");
    }
    ev.log_likelihood += std::log(row);
  }
  return ev;
}

}  // namespace detail

/// Posterior component-membership probabilities; rows sum to one. A sample
/// with zero density under every component raises an error naming it.
inline Eigen::MatrixXd responsibilities(const Mixture& m,
                                        const std::vector<Vector7d>& samples) {
  std::vector<detail::EmComponent> comps;
  for (const auto& we : m) {
    comps.push_back({we.element.ts, we.element.mean, we.element.cov,
                     we.weight});
  }
  const auto ev = detail::em_evaluate(comps, samples);
  Eigen::MatrixXd gamma = ev.dens;
  for (Eigen::Index j = 0; j < gamma.rows(); ++j) {
    gamma.row(j) /= gamma.row(j).sum();
  }
  return gamma;
}

/// Expectation maximization over pose samples. The E step evaluates the
/// responsibilities from the current parameters; the M step re-estimates
/// weighted chart moments (plus eps * I), after which every component is
/// recentered: its tangent point moves to the projected rotation mean, the
/// moments are re-expressed through the chart-change Jacobian and the
/// rotation mean is reset to zero. Component masses are re-estimated with
/// iteration-independent streams so the likelihood varies smoothly.
inline EmResult em_fit(const Mixture& init,
                       const std::vector<Vector7d>& samples,
                       const EmConfig& cfg) {
  if (cfg.max_iterations < 1) throw ValidationError("em_fit: max_iterations");
  if (!(cfg.min_increment > 0.0)) throw ValidationError("em_fit: min_increment");
  if (cfg.eig_floor_eps < 0.0) throw ValidationError("em_fit: eig_floor_eps");
  if (samples.empty()) throw ValidationError("em_fit: no samples");
  for (const auto& s : samples) {
    if (std::abs(s.head<4>().norm() - 1.0) > kUnitNormTol) {
      throw ValidationError("em_fit: sample rotation is not unit-norm");
    }
  }

  std::vector<detail::EmComponent> comps;
  for (const auto& we : init) {
    comps.push_back({we.element.ts, we.element.mean, we.element.cov,
                     we.weight});
  }
  std::vector<detail::EmComponent> previous = comps;
  std::vector<double> trace;
  for (int iter = 0;; ++iter) {
    const auto ev = detail::em_evaluate(comps, samples);
    trace.push_back(ev.log_likelihood);
    if (iter > 0) {
      const double prev = trace[trace.size() - 2];
      const double increment = ev.log_likelihood - prev;
      const double rel = std::abs(increment) / std::max(std::abs(prev), 1e-12);
      if (rel < cfg.min_increment) {
        // Recentering and the covariance floor can turn the final
        // below-threshold step into a tiny decrease; keep the better state.
        if (increment < 0.0) {
          comps = previous;
          trace.pop_back();
        }
        break;
      }
    }
    if (iter == cfg.max_iterations) break;
    previous = comps;

    // M step.
    const std::size_t k = comps.size();
    std::vector<double> nk(k, 0.0);
    Eigen::MatrixXd gamma = ev.dens;
    for (Eigen::Index j = 0; j < gamma.rows(); ++j) {
      gamma.row(j) /= gamma.row(j).sum();
    }
    for (std::size_t c = 0; c < k; ++c) {
      nk[c] = gamma.col(static_cast<Eigen::Index>(c)).sum();
    }

    std::vector<detail::EmComponent> next;
    double nk_kept = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (nk[c] <= kEmStarvationFloor) continue;  // starved: drop component
      nk_kept += nk[c];
      Vector6d mu = Vector6d::Zero();
      for (std::size_t j = 0; j < samples.size(); ++j) {
        const double g = gamma(static_cast<Eigen::Index>(j),
                               static_cast<Eigen::Index>(c));
        if (g > 0.0 && ev.finite[c][j]) mu += g * ev.chart[c][j];
      }
      mu /= nk[c];
      Matrix6d sigma = Matrix6d::Zero();
      for (std::size_t j = 0; j < samples.size(); ++j) {
        const double g = gamma(static_cast<Eigen::Index>(j),
                               static_cast<Eigen::Index>(c));
        if (g > 0.0 && ev.finite[c][j]) {
          const Vector6d diff = ev.chart[c][j] - mu;
          sigma += g * (diff * diff.transpose());
        }
      }
      sigma /= nk[c];
      sigma += cfg.eig_floor_eps * Matrix6d::Identity();
      detail::EmComponent comp{comps[c].ts, mu, sigma, nk[c]};
      // Recenter: tangent point to the projected rotation mean, moments
      // re-expressed, rotation mean reset to zero (PG0 form).
      const Vector7d projected = tangent_to_sphere(comp.ts, comp.mean);
      const TangentSpace centered = TangentSpace::canonical(projected.head<4>());
      if (!same_chart(comp.ts, centered)) {
        const auto [m2, c2] =
            reexpress_moments(comp.ts, comp.mean, comp.cov, centered);
        comp.ts = centered;
        comp.mean = m2;
        comp.cov = c2;
      }
      comp.mean.head<3>().setZero();
      next.push_back(std::move(comp));
    }
    if (next.empty()) throw NumericError("em_fit: every component starved");
    for (auto& comp : next) comp.weight /= nk_kept;
    comps = std::move(next);
  }

  std::vector<WeightedElement> elements;
  elements.reserve(comps.size());
  double wsum = 0.0;
  for (const auto& comp : comps) wsum += comp.weight;
  std::uint64_t idx = 0;
  for (const auto& comp : comps) {
    const double mass = estimate_mass(comp.mean, comp.cov, kDefaultMassSamples,
                                      derive_seed(cfg.seed, idx++));
    elements.push_back({ProjectedGaussian(comp.ts, comp.mean, comp.cov,
                                          std::min(mass, 1.0)),
                        comp.weight / wsum});
  }
  return EmResult{Mixture(std::move(elements)), std::move(trace)};
}

/// One kernel per farthest-point seed sample with a fixed diagonal
/// covariance; the usual starting point for em_fit.
inline Mixture make_init_mixture(
    const std::vector<Vector7d>& samples, std::size_t k,
    const Vector3d& rot_diag = Vector3d(0.01, 0.02, 0.04),
    const Vector3d& trans_diag = Vector3d(1e-6, 1e-6, 1e-6),
    std::int64_t mass_samples = kDefaultMassSamples, std::uint64_t seed = 0) {
  if (samples.empty()) throw ValidationError("make_init_mixture: no samples");
  if (k < 1 || k > samples.size()) {
    throw ValidationError("make_init_mixture: bad component count");
  }
  const auto dist = [](const Vector7d& a, const Vector7d& b) {
    const double dq = std::min((a.head<4>() - b.head<4>()).norm(),
                               (a.head<4>() + b.head<4>()).norm());
    return dq + (a.tail<3>() - b.tail<3>()).norm();
  };
  std::vector<std::size_t> seeds{0};
  std::vector<double> min_dist(samples.size(),
                               std::numeric_limits<double>::infinity());
  while (seeds.size() < k) {
    std::size_t best = 0;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      min_dist[i] = std::min(min_dist[i], dist(samples[i], samples[seeds.back()]));
      if (min_dist[i] > best_dist) {
        best_dist = min_dist[i];
        best = i;
      }
    }
    seeds.push_back(best);
  }
  Matrix6d cov = Matrix6d::Zero();
  cov.diagonal().head<3>() = rot_diag;
  cov.diagonal().tail<3>() = trans_diag;
  std::vector<WeightedElement> elements;
  for (std::size_t i = 0; i < k; ++i) {
    const Vector7d& s = samples[seeds[i]];
    Vector4d point = s.head<4>();
    point /= point.norm();
    Vector6d mean = Vector6d::Zero();
    mean.tail<3>() = s.tail<3>();
    elements.push_back(
        {make_projected_gaussian(TangentSpace::canonical(point), mean, cov,
                                 mass_samples, derive_seed(seed, i)),
         1.0 / static_cast<double>(k)});
  }
  return Mixture(std::move(elements));
}

}  // namespace mopg
