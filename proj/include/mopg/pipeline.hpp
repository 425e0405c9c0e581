#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mopg/errors.hpp"
#include "mopg/mixture.hpp"

namespace mopg {

enum class SampleKind {
  kEqualOnQuatAndBox,
  kEqualRotationXYNormalZ,
  kSiftReferredToObject,
};

/// Pose sample generator specification. Parameter layout per kind:
///   equal-on-quat-and-box:      [lox, hix, loy, hiy, loz, hiz]
///   equal-rotation-xy-normal-z: [sigma_z, visibility_angle]
///   sift-referred-to-object:    [sigma_z, visibility_angle, sigma_xy,
///                                mean_z, sigma_z_offset,
///                                qa, qb, qc, qd, tx, ty, tz]
/// where the last seven entries give the feature-in-object transform.
struct SampleSpec {
  SampleKind kind = SampleKind::kEqualOnQuatAndBox;
  std::vector<double> params;

  static std::size_t expected_param_count(SampleKind kind) {
    switch (kind) {
      case SampleKind::kEqualOnQuatAndBox:
        return 6;
      case SampleKind::kEqualRotationXYNormalZ:
        return 2;
      case SampleKind::kSiftReferredToObject:
        return 12;
    }
    throw ValidationError("SampleSpec: unknown kind");
  }

  void validate() const {
    if (params.size() != expected_param_count(kind)) {
      throw ValidationError("SampleSpec: wrong parameter count");
    }
    if (kind == SampleKind::kEqualOnQuatAndBox) {
      for (int i = 0; i < 3; ++i) {
        if (params[2 * i] > params[2 * i + 1]) {
          throw ValidationError("SampleSpec: box range with lo > hi");
        }
      }
    }
  }
};

namespace detail {

/// Uniform draw on S3 via a normalized 4-D Gaussian; fixed uniform
/// consumption per draw.
inline Quaternion uniform_unit_quaternion(RngStream& rng) {
  Eigen::Vector4d v;
  for (int i = 0; i < 4; ++i) v(i) = rng.normal();
  v /= v.norm();
  return {v(0), v(1), v(2), v(3)};
}

/// Rotation from the feature-pose model: a normal rotation about z followed
/// by a uniform rotation about a uniformly-directed axis in the x-y plane.
inline Quaternion feature_rotation(RngStream& rng, double sigma_z,
                                   double visibility_angle) {
  const double zrad = sigma_z * rng.normal();
  const Quaternion rqz = from_axis_angle(zrad, {0.0, 0.0, 1.0});
  const double axis_angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const Eigen::Vector3d axis(std::cos(axis_angle), std::sin(axis_angle), 0.0);
  const double xyrad = rng.uniform(0.0, visibility_angle);
  const Quaternion rqxy = from_axis_angle(xyrad, axis);
  return rqxy * rqz;
}

}  // namespace detail

/// Draws n pose samples (unit rotation + translation) from the requested
/// generator. Deterministic given the seed.
inline std::vector<Vector7d> make_samples(std::int64_t n,
                                          const SampleSpec& spec,
                                          std::uint64_t seed) {
  if (n < 0) throw ValidationError("make_samples: n must be >= 0");
  spec.validate();
  RngStream rng(seed);
  std::vector<Vector7d> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    Vector7d s;
    switch (spec.kind) {
      case SampleKind::kEqualOnQuatAndBox: {
        const Quaternion q = detail::uniform_unit_quaternion(rng);
        s.head<4>() = q.vec();
        for (int a = 0; a < 3; ++a) {
          s(4 + a) = rng.uniform(spec.params[2 * a], spec.params[2 * a + 1]);
        }
        break;
      }
      case SampleKind::kEqualRotationXYNormalZ: {
        const Quaternion q =
            detail::feature_rotation(rng, spec.params[0], spec.params[1]);
        s.head<4>() = q.vec();
        s.tail<3>().setZero();
        break;
      }
      case SampleKind::kSiftReferredToObject: {
        const Quaternion rqf =
            detail::feature_rotation(rng, spec.params[0], spec.params[1]);
        const double tx = spec.params[2] * rng.normal();
        const double ty = spec.params[2] * rng.normal();
        const double tz = spec.params[3] + spec.params[4] * rng.normal();
        const DualQuaternion dqf =
            pose_to_dq(normalized(rqf), Quaternion{0.0, tx, ty, tz});
        const Quaternion qrfo = normalized(Quaternion{
            spec.params[5], spec.params[6], spec.params[7], spec.params[8]});
        const Quaternion qtfo{0.0, spec.params[9], spec.params[10],
                              spec.params[11]};
        const DualQuaternion dqof = dq_inverse(pose_to_dq(qrfo, qtfo));
        const auto [qr, qt] = dq_to_pose(dqf * dqof);
        s.head<4>() = normalized(qr).vec();
        s.tail<3>() = qt.imag();
        break;
      }
    }
    out.push_back(s);
  }
  return out;
}

/// Sensor model: the object-pose belief in camera coordinates obtained from
/// a feature-pose mixture and the two bracketing transforms,
/// camera_to_feature (PG1, applied last) and feature_to_object (PG2, applied
/// first). Element count is preserved.
inline Mixture sensor_model(const Mixture& feature_model,
                            const ProjectedGaussian& camera_to_feature,
                            const ProjectedGaussian& feature_to_object,
                            std::int64_t mass_samples = kDefaultMassSamples,
                            std::uint64_t seed = 0) {
  const Mixture shifted =
      compose_mixtures(feature_model, Mixture::single(camera_to_feature),
                       mass_samples, derive_seed(seed, 1));
  return compose_mixtures(Mixture::single(feature_to_object), shifted,
                          mass_samples, derive_seed(seed, 2));
}

/// Axis-aligned box over the 6-D chart coordinates (3 rotation + 3
/// translation).
struct Box6 {
  Vector6d lo = Vector6d::Zero();
  Vector6d hi = Vector6d::Zero();

  void validate() const {
    for (int i = 0; i < 6; ++i) {
      if (lo(i) > hi(i)) throw ValidationError("Box6: lo > hi");
    }
  }

  bool contains(const Vector6d& x) const {
    for (int i = 0; i < 6; ++i) {
      if (x(i) < lo(i) || x(i) > hi(i)) return false;
    }
    return true;
  }
};

/// Chart used for box coordinates: the tangent space of the highest-weight
/// component (first on ties), which survives pruning and is reproducible.
inline const TangentSpace& dominant_chart(const Mixture& m) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < m.size(); ++i) {
    if (m[i].weight > m[best].weight) best = i;
  }
  return m[best].element.ts;
}

/// Fraction of n mixture samples whose dominant-chart coordinates fall in
/// the box, with the binomial standard error. Samples landing in the chart's
/// equator band count as outside.
inline McEstimate box_probability(const Mixture& m, const Box6& box,
                                  std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("box_probability: n must be >= 1");
  box.validate();
  const TangentSpace& chart = dominant_chart(m);
  const auto samples = sample_mixture(m, n, seed);
  std::int64_t hits = 0;
  for (const auto& s : samples) {
    try {
      if (box.contains(sphere_to_tangent(chart, s.pose))) ++hits;
    } catch (const ProjectionAtInfinity&) {
      // zero-density convention: outside every box
    }
  }
  McEstimate est;
  est.value = static_cast<double>(hits) / static_cast<double>(n);
  est.n = n;
  est.sample_variance = est.value * (1.0 - est.value);
  est.std_error = std::sqrt(est.sample_variance / static_cast<double>(n));
  est.seed = seed;
  return est;
}

/// Index of the box with the largest estimated probability mass over a
/// caller-supplied finite grid.
inline std::size_t box_argmax(const Mixture& m, std::span<const Box6> boxes,
                              std::int64_t n, std::uint64_t seed) {
  if (boxes.empty()) throw ValidationError("box_argmax: no boxes");
  std::size_t best = 0;
  double best_value = -1.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double value = box_probability(m, boxes[i], n, seed).value;
    if (value > best_value) {
      best_value = value;
      best = i;
    }
  }
  return best;
}

struct GraspCriterion {
  double threshold_g = 0.0;  // distance threshold G
  double epsilon = 0.05;     // failure budget in (0, 1)
  std::int64_t n = 10000;    // MC sample count for the distance estimate
  std::uint64_t seed = 0;

  void validate() const {
    if (!(threshold_g >= 0.0)) throw ValidationError("GraspCriterion: G < 0");
    if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
      throw ValidationError("GraspCriterion: epsilon outside (0, 1)");
    }
    if (n < 1) throw ValidationError("GraspCriterion: n < 1");
  }
};

struct GraspResult {
  bool pass = false;
  McEstimate distance;
};

/// Conservative one-shot grasp check: estimates the squared L2 distance
/// between gripper and object beliefs and passes iff
/// estimate + 3 * std_error <= G.
inline GraspResult grasp_check(const Mixture& gripper, const Mixture& object,
                               const GraspCriterion& crit) {
  crit.validate();
  GraspResult result;
  result.distance = l2_distance_sq(gripper, object, crit.n, crit.seed);
  result.pass =
      result.distance.value + 3.0 * result.distance.std_error <=
      crit.threshold_g;
  return result;
}

struct Observation {
  Mixture feature_model;
  ProjectedGaussian camera_to_feature;   // PG1
  ProjectedGaussian feature_to_object;   // PG2
};

struct PipelineConfig {
  /// Total mixture weight the pruning stages may drop (epsilon''').
  double prune_budget = 0.0;
  /// Component count the merge stage reduces to.
  std::size_t merge_target = 10;
  std::int64_t mass_samples = kDefaultMassSamples;
  /// Sample count for the per-stage integral estimate.
  std::int64_t integral_samples = 2000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(prune_budget >= 0.0) || prune_budget >= 1.0) {
      throw ValidationError("PipelineConfig: prune_budget outside [0, 1)");
    }
    if (merge_target < 1) throw ValidationError("PipelineConfig: merge_target");
    if (mass_samples < 1 || integral_samples < 1) {
      throw ValidationError("PipelineConfig: sample counts must be >= 1");
    }
  }
};

struct StageReport {
  std::size_t observation = 0;
  std::size_t count_sensor = 0;   // elements after the sensor model
  std::size_t count_fused = 0;    // after fusing with the running belief
  std::size_t count_pruned = 0;   // after the budgeted prune
  std::size_t count_merged = 0;   // after greedy reduction
  double dropped_weight = 0.0;    // weight dropped at this stage
  double cumulative_dropped = 0.0;
  double bound = 0.0;             // 2 * cumulative_dropped
  std::vector<double> merge_bounds;  // chosen B_s values, in merge order
  McEstimate integral;            // fresh estimate of the mixture integral
};

struct PipelineResult {
  Mixture belief;
  std::vector<StageReport> stages;
  bool stopped_early = false;
  std::string diagnostic;
};

namespace detail {

/// Largest prefix of the ascending-weight order whose total weight stays
/// within the remaining budget; never drops every element.
inline PruneResult prune_within_budget(const Mixture& m, double budget) {
  const std::size_t n = m.size();
  std::vector<double> weights;
  weights.reserve(n);
  for (const auto& we : m) weights.push_back(we.weight);
  std::sort(weights.begin(), weights.end());
  std::size_t n_drop = 0;
  double total = 0.0;
  while (n_drop + 1 < n && total + weights[n_drop] <= budget) {
    total += weights[n_drop];
    ++n_drop;
  }
  return prune(m, PrunePolicy::to_count(n - n_drop));
}

}  // namespace detail

/// Simulated localization loop: for every observation, the sensor model is
/// evaluated, fused with the running belief, pruned within the remaining
/// epsilon''' budget and greedily merged down to the target count. Stops
/// early with a diagnostic when the prune budget is exhausted.
inline PipelineResult run_pipeline(std::span<const Observation> observations,
                                   const PipelineConfig& cfg) {
  if (observations.empty()) throw ValidationError("run_pipeline: no input");
  cfg.validate();

  std::vector<StageReport> stages;
  double cumulative_dropped = 0.0;
  bool stopped = false;
  std::string diagnostic;

  Mixture belief = sensor_model(
      observations[0].feature_model, observations[0].camera_to_feature,
      observations[0].feature_to_object, cfg.mass_samples,
      derive_seed(cfg.seed, 1000));
  {
    StageReport r;
    r.observation = 0;
    r.count_sensor = r.count_fused = r.count_pruned = r.count_merged =
        belief.size();
    r.cumulative_dropped = cumulative_dropped;
    r.bound = 0.0;
    r.integral =
        mixture_mass(belief, cfg.integral_samples, derive_seed(cfg.seed, 2000));
    stages.push_back(std::move(r));
  }

  for (std::size_t i = 1; i < observations.size(); ++i) {
    StageReport r;
    r.observation = i;
    const Mixture sensed = sensor_model(
        observations[i].feature_model, observations[i].camera_to_feature,
        observations[i].feature_to_object, cfg.mass_samples,
        derive_seed(cfg.seed, 1000 + i));
    r.count_sensor = sensed.size();

    FuseConfig fuse_cfg;
    fuse_cfg.mass_samples = cfg.mass_samples;
    fuse_cfg.seed = derive_seed(cfg.seed, 3000 + i);
    belief = fuse_mixtures(belief, sensed, fuse_cfg);
    r.count_fused = belief.size();

    // Budget exhaustion: earlier stages consumed the epsilon''' budget, the
    // mixture still needs reduction, and what remains cannot fund dropping
    // even the lightest element. A budget that never funded any drop is not
    // exhausted; pruning is then simply a no-op.
    const double remaining = cfg.prune_budget - cumulative_dropped;
    double min_weight = belief[0].weight;
    for (const auto& we : belief) min_weight = std::min(min_weight, we.weight);
    if (cumulative_dropped > 0.0 && belief.size() > cfg.merge_target &&
        remaining < min_weight) {
      stopped = true;
      diagnostic = "prune budget exhausted at observation " +
                   std::to_string(i);
      r.count_pruned = r.count_merged = belief.size();
      r.cumulative_dropped = cumulative_dropped;
      r.bound = 2.0 * cumulative_dropped;
      r.integral = mixture_mass(belief, cfg.integral_samples,
                                derive_seed(cfg.seed, 2000 + i));
      stages.push_back(std::move(r));
      break;
    }
    PruneResult pruned = detail::prune_within_budget(belief, remaining);
    cumulative_dropped += pruned.dropped_weight;
    r.dropped_weight = pruned.dropped_weight;
    r.cumulative_dropped = cumulative_dropped;
    r.bound = 2.0 * cumulative_dropped;
    belief = std::move(pruned.mixture);
    r.count_pruned = belief.size();

    std::vector<ReduceStep> steps;
    belief = reduce_by_merging(belief, cfg.merge_target, cfg.mass_samples,
                               derive_seed(cfg.seed, 4000 + i), &steps);
    for (const auto& s : steps) r.merge_bounds.push_back(s.bound);
    r.count_merged = belief.size();
    r.integral = mixture_mass(belief, cfg.integral_samples,
                              derive_seed(cfg.seed, 2000 + i));
    stages.push_back(std::move(r));
  }

  return PipelineResult{std::move(belief), std::move(stages), stopped,
                        std::move(diagnostic)};
}

}  // namespace mopg
