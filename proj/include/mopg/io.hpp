#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mopg/errors.hpp"
#include "mopg/mixture.hpp"
#include "mopg/montecarlo.hpp"
#include "mopg/pipeline.hpp"

namespace mopg {

using Json = nlohmann::json;

/// Options applied when loading elements whose mass is absent from the file.
struct LoadOptions {
  std::int64_t mass_samples = kDefaultMassSamples;
  std::uint64_t seed = 0;
};

// --- quaternions -----------------------------------------------------------

/// Serialized as [a, b, c, d] with the canonical sign (first nonzero
/// component positive).
inline Json to_json(const Quaternion& q) {
  const Quaternion c = canonical_sign(q);
  return Json::array({c.a, c.b, c.c, c.d});
}

inline Quaternion quaternion_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw ValidationError("quaternion: expected a 4-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>()};
}

inline Json to_json(const DualQuaternion& dq) {
  // Flip both parts together; +-dq describe the same pose.
  DualQuaternion c = dq;
  const Quaternion canon = canonical_sign(dq.real);
  if (canon.a != dq.real.a || canon.b != dq.real.b || canon.c != dq.real.c ||
      canon.d != dq.real.d) {
    c.real = -dq.real;
    c.dual = -dq.dual;
  }
  return Json::array({Json::array({c.real.a, c.real.b, c.real.c, c.real.d}),
                      Json::array({c.dual.a, c.dual.b, c.dual.c, c.dual.d})});
}

inline DualQuaternion dual_quaternion_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw ValidationError("dual quaternion: expected [[4],[4]]");
  }
  return {quaternion_from_json(j[0]), quaternion_from_json(j[1])};
}

// --- tangent spaces ---------------------------------------------------------

/// { "point": [4], "basis": [[4] x 3 columns] }; the basis is optional on
/// input and recomputed canonically from the point when absent.
inline Json to_json(const TangentSpace& ts) {
  Json basis = Json::array();
  for (int c = 0; c < 3; ++c) {
    basis.push_back(Json::array(
        {ts.basis(0, c), ts.basis(1, c), ts.basis(2, c), ts.basis(3, c)}));
  }
  Json j;
  j["point"] = Json::array({ts.point(0), ts.point(1), ts.point(2), ts.point(3)});
  j["basis"] = basis;
  return j;
}

inline TangentSpace tangent_space_from_json(const Json& j) {
  if (!j.contains("point")) throw ValidationError("tangent space: no point");
  const Json& p = j["point"];
  if (!p.is_array() || p.size() != 4) {
    throw ValidationError("tangent space: point must have 4 entries");
  }
  Vector4d point(p[0].get<double>(), p[1].get<double>(), p[2].get<double>(),
                 p[3].get<double>());
  if (!j.contains("basis")) return TangentSpace::canonical(point);
  const Json& b = j["basis"];
  if (!b.is_array() || b.size() != 3) {
    throw ValidationError("tangent space: basis must have 3 columns");
  }
  Basis43 basis;
  for (int c = 0; c < 3; ++c) {
    if (!b[c].is_array() || b[c].size() != 4) {
      throw ValidationError("tangent space: basis column must have 4 entries");
    }
    for (int r = 0; r < 4; ++r) basis(r, c) = b[c][r].get<double>();
  }
  return TangentSpace::with_basis(point, basis);
}

// --- elements and mixtures --------------------------------------------------

/// Element object: { "weight"?, "tangent_point": [4], "mean": [6],
/// "cov": [[6] x 6 rows], "mass"? }. The basis is omitted (canonical); an
/// absent mass is re-estimated on load.
inline Json to_json(const ProjectedGaussian& pg) {
  Json j;
  const Vector4d point =
      canonical_sign(Quaternion{pg.ts.point(0), pg.ts.point(1), pg.ts.point(2),
                                pg.ts.point(3)})
          .vec();
  j["tangent_point"] = Json::array({point(0), point(1), point(2), point(3)});
  Json mean = Json::array();
  for (int i = 0; i < 6; ++i) mean.push_back(pg.mean(i));
  j["mean"] = mean;
  Json cov = Json::array();
  for (int r = 0; r < 6; ++r) {
    Json row = Json::array();
    for (int c = 0; c < 6; ++c) row.push_back(pg.cov(r, c));
    cov.push_back(row);
  }
  j["cov"] = cov;
  j["mass"] = pg.mass;
  return j;
}

inline ProjectedGaussian projected_gaussian_from_json(
    const Json& j, const LoadOptions& opts = {}) {
  if (!j.contains("tangent_point") || !j.contains("mean") || !j.contains("cov")) {
    throw ValidationError("element: tangent_point, mean and cov are required");
  }
  const Json& p = j["tangent_point"];
  if (!p.is_array() || p.size() != 4) {
    throw ValidationError("element: tangent_point must have 4 entries");
  }
  const Vector4d point(p[0].get<double>(), p[1].get<double>(),
                       p[2].get<double>(), p[3].get<double>());
  const Json& mj = j["mean"];
  if (!mj.is_array() || mj.size() != 6) {
    throw ValidationError("element: mean must have 6 entries");
  }
  Vector6d mean;
  for (int i = 0; i < 6; ++i) mean(i) = mj[i].get<double>();
  const Json& cj = j["cov"];
  if (!cj.is_array() || cj.size() != 6) {
    throw ValidationError("element: cov must be 6x6");
  }
  Matrix6d cov;
  for (int r = 0; r < 6; ++r) {
    if (!cj[r].is_array() || cj[r].size() != 6) {
      throw ValidationError("element: cov must be 6x6");
    }
    for (int c = 0; c < 6; ++c) cov(r, c) = cj[r][c].get<double>();
  }
  const TangentSpace ts = TangentSpace::canonical(point);
  if (j.contains("mass")) {
    return ProjectedGaussian(ts, mean, cov, j["mass"].get<double>());
  }
  return make_projected_gaussian(ts, mean, cov, opts.mass_samples, opts.seed);
}

/// Mixture object: { "elements": [ element objects with "weight" ] }.
inline Json to_json(const Mixture& m) {
  Json elements = Json::array();
  for (const auto& we : m) {
    Json e = to_json(we.element);
    e["weight"] = we.weight;
    elements.push_back(std::move(e));
  }
  Json j;
  j["elements"] = std::move(elements);
  return j;
}

inline Mixture mixture_from_json(const Json& j, const LoadOptions& opts = {}) {
  if (!j.contains("elements") || !j["elements"].is_array()) {
    throw ValidationError("mixture: missing elements array");
  }
  std::vector<WeightedElement> elements;
  std::uint64_t idx = 0;
  for (const Json& e : j["elements"]) {
    if (!e.contains("weight")) {
      throw ValidationError("mixture: element without weight");
    }
    LoadOptions element_opts = opts;
    element_opts.seed = derive_seed(opts.seed, idx++);
    elements.push_back({projected_gaussian_from_json(e, element_opts),
                        e["weight"].get<double>()});
  }
  return Mixture(std::move(elements));
}

// --- estimates and pipeline objects ----------------------------------------

inline Json to_json(const McEstimate& est) {
  Json j;
  j["value"] = est.value;
  j["n"] = est.n;
  j["std_error"] = est.std_error;
  j["seed"] = est.seed;
  return j;
}

inline std::string sample_kind_name(SampleKind kind) {
  switch (kind) {
    case SampleKind::kEqualOnQuatAndBox:
      return "equal-on-quat-and-box";
    case SampleKind::kEqualRotationXYNormalZ:
      return "equal-rotation-xy-normal-z";
    case SampleKind::kSiftReferredToObject:
      return "sift-referred-to-object";
  }
  throw ValidationError("unknown sample kind");
}

inline SampleKind sample_kind_from_name(const std::string& name) {
  if (name == "equal-on-quat-and-box") return SampleKind::kEqualOnQuatAndBox;
  if (name == "equal-rotation-xy-normal-z") {
    return SampleKind::kEqualRotationXYNormalZ;
  }
  if (name == "sift-referred-to-object") {
    return SampleKind::kSiftReferredToObject;
  }
  throw ValidationError("unknown sample kind: " + name);
}

inline Json to_json(const SampleSpec& spec) {
  Json j;
  j["kind"] = sample_kind_name(spec.kind);
  j["params"] = spec.params;
  return j;
}

inline SampleSpec sample_spec_from_json(const Json& j) {
  if (!j.contains("kind") || !j.contains("params")) {
    throw ValidationError("sample spec: kind and params are required");
  }
  SampleSpec spec;
  spec.kind = sample_kind_from_name(j["kind"].get<std::string>());
  spec.params = j["params"].get<std::vector<double>>();
  spec.validate();
  return spec;
}

inline Json to_json(const StageReport& r) {
  Json j;
  j["observation"] = r.observation;
  j["count_sensor"] = r.count_sensor;
  j["count_fused"] = r.count_fused;
  j["count_pruned"] = r.count_pruned;
  j["count_merged"] = r.count_merged;
  j["dropped_weight"] = r.dropped_weight;
  j["cumulative_dropped"] = r.cumulative_dropped;
  j["bound"] = r.bound;
  j["merge_bounds"] = r.merge_bounds;
  j["integral"] = to_json(r.integral);
  return j;
}

inline Json to_json(const PipelineResult& result) {
  Json j;
  j["belief"] = to_json(result.belief);
  Json stages = Json::array();
  for (const auto& s : result.stages) stages.push_back(to_json(s));
  j["stages"] = std::move(stages);
  j["stopped_early"] = result.stopped_early;
  j["diagnostic"] = result.diagnostic;
  return j;
}

inline Observation observation_from_json(const Json& j,
                                         const LoadOptions& opts = {}) {
  if (!j.contains("feature_model") || !j.contains("camera_to_feature") ||
      !j.contains("feature_to_object")) {
    throw ValidationError(
        "observation: feature_model, camera_to_feature and "
        "feature_to_object are required");
  }
  return Observation{mixture_from_json(j["feature_model"], opts),
                     projected_gaussian_from_json(j["camera_to_feature"], opts),
                     projected_gaussian_from_json(j["feature_to_object"], opts)};
}

// --- CSV sample files -------------------------------------------------------

inline constexpr const char* kSampleCsvHeader =
    "qa,qb,qc,qd,tx,ty,tz,component";

namespace detail {

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

/// Writes samples with full double-precision round-trip formatting. The
/// component column is 0 for generator output.
inline void write_samples_csv(std::ostream& os,
                              const std::vector<Vector7d>& samples,
                              const std::vector<std::size_t>* components =
                                  nullptr) {
  os << kSampleCsvHeader << "\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Vector7d& s = samples[i];
    for (int k = 0; k < 7; ++k) {
      os << detail::format_double(s(k)) << ",";
    }
    os << (components ? (*components)[i] : 0) << "\n";
  }
}

inline void write_samples_csv(std::ostream& os,
                              const std::vector<MixtureSample>& samples) {
  std::vector<Vector7d> poses;
  std::vector<std::size_t> components;
  poses.reserve(samples.size());
  for (const auto& s : samples) {
    poses.push_back(s.pose);
    components.push_back(s.component);
  }
  write_samples_csv(os, poses, &components);
}

inline std::pair<std::vector<Vector7d>, std::vector<std::size_t>>
read_samples_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kSampleCsvHeader) {
    throw ValidationError("sample CSV: bad header");
  }
  std::vector<Vector7d> samples;
  std::vector<std::size_t> components;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    Vector7d s;
    for (int k = 0; k < 7; ++k) {
      if (!std::getline(ss, field, ',')) {
        throw ValidationError("sample CSV: short row at line " +
                              std::to_string(lineno));
      }
      try {
        s(k) = std::stod(field);
      } catch (const std::exception&) {
        throw ValidationError("sample CSV: bad number at line " +
                              std::to_string(lineno));
      }
    }
    if (!std::getline(ss, field, ',')) {
      throw ValidationError("sample CSV: missing component at line " +
                            std::to_string(lineno));
    }
    samples.push_back(s);
    components.push_back(static_cast<std::size_t>(std::stoull(field)));
  }
  return {std::move(samples), std::move(components)};
}

// --- file helpers ------------------------------------------------------------

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("invalid JSON in " + path + ": " + e.what());
  }
}

inline void save_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open file for writing: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace mopg
