// Command-line front end: sample generation, mixture fitting and the
// fuse/prune/merge operations over JSON mixture files and CSV sample files.
//
// Exit codes: 0 success, 2 validation error, 3 numeric error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mopg/mopg.hpp"

namespace {

using mopg::Json;

mopg::Mixture load_mixture(const std::string& path,
                           const mopg::LoadOptions& opts) {
  return mopg::mixture_from_json(mopg::load_json_file(path), opts);
}

mopg::Vector7d parse_pose(const std::string& text) {
  std::stringstream ss(text);
  std::string field;
  mopg::Vector7d pose;
  for (int i = 0; i < 7; ++i) {
    if (!std::getline(ss, field, ',')) {
      throw mopg::ValidationError("--at expects 7 comma-separated numbers");
    }
    try {
      pose(i) = std::stod(field);
    } catch (const std::exception&) {
      throw mopg::ValidationError("--at: bad number '" + field + "'");
    }
  }
  return pose;
}

mopg::Vector3d parse_vec3(const std::string& text, const char* flag) {
  std::stringstream ss(text);
  std::string field;
  mopg::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(ss, field, ',')) {
      throw mopg::ValidationError(std::string(flag) +
                                  " expects 3 comma-separated numbers");
    }
    v(i) = std::stod(field);
  }
  return v;
}

struct CommonArgs {
  std::uint64_t seed = 0;
  std::int64_t n = 0;
  std::string in_path;
  std::string out_path;
  std::string format = "json";
  double tolerance = 0.0;
  int max_iter = 0;
};

void write_or_print(const std::string& out_path, const Json& j) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    mopg::save_json_file(out_path, j);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"mixtures of projected Gaussians over S3 x R3"};
  app.require_subcommand(1);

  // --- make-samples ---------------------------------------------------------
  auto* make_cmd = app.add_subcommand("make-samples", "draw pose samples");
  std::string spec_path;
  CommonArgs margs;
  margs.n = 100;
  make_cmd->add_option("--spec", spec_path, "sample spec JSON file")->required();
  make_cmd->add_option("--n", margs.n, "sample count");
  make_cmd->add_option("--seed", margs.seed, "RNG seed");
  make_cmd->add_option("--out", margs.out_path, "output file");
  make_cmd->add_option("--format", margs.format, "csv|json");
  make_cmd->callback([&] {
    const auto spec = mopg::sample_spec_from_json(mopg::load_json_file(spec_path));
    const auto samples = mopg::make_samples(margs.n, spec, margs.seed);
    if (margs.format == "csv") {
      std::ofstream out;
      std::ostream* os = &std::cout;
      if (!margs.out_path.empty()) {
        out.open(margs.out_path);
        if (!out) throw mopg::ValidationError("cannot open " + margs.out_path);
        os = &out;
      }
      mopg::write_samples_csv(*os, samples);
    } else if (margs.format == "json") {
      Json arr = Json::array();
      for (const auto& s : samples) {
        Json row = Json::array();
        for (int i = 0; i < 7; ++i) row.push_back(s(i));
        arr.push_back(std::move(row));
      }
      write_or_print(margs.out_path, arr);
    } else {
      throw mopg::ValidationError("--format must be csv or json");
    }
  });

  // --- fit -------------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "EM-fit a mixture to samples");
  CommonArgs fargs;
  fargs.n = mopg::kDefaultMassSamples;
  fargs.tolerance = 1e-6;
  fargs.max_iter = 100;
  std::string init_path;
  std::size_t components = 0;
  double eps = 1e-9;
  std::string rot_var = "0.01,0.02,0.04";
  std::string trans_var = "1e-6,1e-6,1e-6";
  std::string report_path;
  fit_cmd->add_option("--in", fargs.in_path, "sample CSV file")->required();
  fit_cmd->add_option("--init", init_path, "initial mixture JSON");
  fit_cmd->add_option("--components", components,
                      "build the initial mixture from this many seed samples");
  fit_cmd->add_option("--init-rot-var", rot_var,
                      "initial rotation variances a,b,c");
  fit_cmd->add_option("--init-trans-var", trans_var,
                      "initial translation variances x,y,z");
  fit_cmd->add_option("--max-iter", fargs.max_iter, "iteration budget");
  fit_cmd->add_option("--tolerance", fargs.tolerance,
                      "relative log-likelihood stop threshold");
  fit_cmd->add_option("--eps", eps, "covariance eigenvalue floor");
  fit_cmd->add_option("--seed", fargs.seed, "RNG seed");
  fit_cmd->add_option("--n", fargs.n, "mass estimation samples");
  fit_cmd->add_option("--out", fargs.out_path, "fitted mixture JSON");
  fit_cmd->add_option("--report", report_path, "log-likelihood trace JSON");
  fit_cmd->callback([&] {
    std::ifstream in(fargs.in_path);
    if (!in) throw mopg::ValidationError("cannot open " + fargs.in_path);
    const auto [samples, comps] = mopg::read_samples_csv(in);
    (void)comps;
    mopg::Mixture init = [&] {
      if (!init_path.empty()) {
        return load_mixture(init_path, {fargs.n, fargs.seed});
      }
      if (components == 0) {
        throw mopg::ValidationError("fit: pass --init or --components");
      }
      return mopg::make_init_mixture(samples, components,
                                     parse_vec3(rot_var, "--init-rot-var"),
                                     parse_vec3(trans_var, "--init-trans-var"),
                                     fargs.n, fargs.seed);
    }();
    mopg::EmConfig cfg;
    cfg.max_iterations = fargs.max_iter;
    cfg.min_increment = fargs.tolerance;
    cfg.eig_floor_eps = eps;
    cfg.seed = fargs.seed;
    const auto result = mopg::em_fit(init, samples, cfg);
    write_or_print(fargs.out_path, mopg::to_json(result.mixture));
    if (!report_path.empty()) {
      Json rep;
      rep["log_likelihood"] = result.log_likelihood;
      rep["iterations"] = result.log_likelihood.size() - 1;
      mopg::save_json_file(report_path, rep);
    }
  });

  // --- fuse ------------------------------------------------------------------
  auto* fuse_cmd = app.add_subcommand("fuse", "fuse two mixtures");
  CommonArgs fuargs;
  fuargs.n = mopg::kDefaultMassSamples;
  std::vector<std::string> fuse_inputs;
  std::string alpha_form = "squared-dot";
  bool no_recenter = false;
  fuse_cmd->add_option("inputs", fuse_inputs, "two mixture JSON files")
      ->expected(2);
  fuse_cmd->add_option("--seed", fuargs.seed, "RNG seed");
  fuse_cmd->add_option("--n", fuargs.n, "mass estimation samples");
  fuse_cmd->add_option("--out", fuargs.out_path, "output mixture JSON");
  fuse_cmd->add_option("--alpha-form", alpha_form,
                       "tangent-point weight form: squared-dot|squared-angle");
  fuse_cmd->add_flag("--no-recenter", no_recenter,
                     "keep fused elements on the midpoint chart");
  fuse_cmd->callback([&] {
    mopg::FuseConfig cfg;
    cfg.mass_samples = fuargs.n;
    cfg.seed = fuargs.seed;
    cfg.recenter = !no_recenter;
    if (alpha_form == "squared-dot") {
      cfg.alpha_form = mopg::AlphaForm::kSquaredDot;
    } else if (alpha_form == "squared-angle") {
      cfg.alpha_form = mopg::AlphaForm::kSquaredAngle;
    } else {
      throw mopg::ValidationError("--alpha-form must be squared-dot or squared-angle");
    }
    const auto fused =
        mopg::fuse_mixtures(load_mixture(fuse_inputs[0], {fuargs.n, fuargs.seed}),
                            load_mixture(fuse_inputs[1], {fuargs.n, fuargs.seed}),
                            cfg);
    write_or_print(fuargs.out_path, mopg::to_json(fused));
  });

  // --- compose ----------------------------------------------------------------
  auto* compose_cmd = app.add_subcommand("compose", "compose pose and motion");
  CommonArgs cargs;
  cargs.n = mopg::kDefaultMassSamples;
  std::vector<std::string> compose_inputs;
  compose_cmd->add_option("inputs", compose_inputs,
                          "pose and motion mixture JSON files")
      ->expected(2);
  compose_cmd->add_option("--seed", cargs.seed, "RNG seed");
  compose_cmd->add_option("--n", cargs.n, "mass estimation samples");
  compose_cmd->add_option("--out", cargs.out_path, "output mixture JSON");
  compose_cmd->callback([&] {
    const auto composed = mopg::compose_mixtures(
        load_mixture(compose_inputs[0], {cargs.n, cargs.seed}),
        load_mixture(compose_inputs[1], {cargs.n, cargs.seed}), cargs.n,
        cargs.seed);
    write_or_print(cargs.out_path, mopg::to_json(composed));
  });

  // --- prune -----------------------------------------------------------------
  auto* prune_cmd = app.add_subcommand("prune", "drop low-weight elements");
  CommonArgs pargs;
  double threshold = -1.0;
  std::size_t keep_count = 0;
  prune_cmd->add_option("--in", pargs.in_path, "mixture JSON")->required();
  prune_cmd->add_option("--out", pargs.out_path, "output mixture JSON");
  prune_cmd->add_option("--threshold", threshold, "drop weights below this");
  prune_cmd->add_option("--count", keep_count, "keep this many elements");
  prune_cmd->callback([&] {
    if ((threshold < 0.0) == (keep_count == 0)) {
      throw mopg::ValidationError("prune: pass exactly one of --threshold/--count");
    }
    const auto policy = threshold >= 0.0
                            ? mopg::PrunePolicy::by_threshold(threshold)
                            : mopg::PrunePolicy::to_count(keep_count);
    const auto result = mopg::prune(load_mixture(pargs.in_path, {}), policy);
    write_or_print(pargs.out_path, mopg::to_json(result.mixture));
    Json rep;
    rep["dropped_weight"] = result.dropped_weight;
    rep["bound"] = result.bound;
    rep["elements"] = result.mixture.size();
    std::cerr << rep.dump() << "\n";
  });

  // --- merge -----------------------------------------------------------------
  auto* merge_cmd = app.add_subcommand("merge", "greedy sKL-bound reduction");
  CommonArgs meargs;
  meargs.n = mopg::kDefaultMassSamples;
  std::size_t target = 1;
  merge_cmd->add_option("--in", meargs.in_path, "mixture JSON")->required();
  merge_cmd->add_option("--out", meargs.out_path, "output mixture JSON");
  merge_cmd->add_option("--count", target, "target component count")->required();
  merge_cmd->add_option("--seed", meargs.seed, "RNG seed");
  merge_cmd->add_option("--n", meargs.n, "mass estimation samples");
  merge_cmd->callback([&] {
    const auto reduced =
        mopg::reduce_by_merging(load_mixture(meargs.in_path, {meargs.n, meargs.seed}),
                                target, meargs.n, meargs.seed);
    write_or_print(meargs.out_path, mopg::to_json(reduced));
  });

  // --- density ----------------------------------------------------------------
  auto* density_cmd = app.add_subcommand("density", "evaluate the density");
  CommonArgs dargs;
  std::string at;
  density_cmd->add_option("--in", dargs.in_path, "mixture JSON")->required();
  density_cmd->add_option("--at", at, "pose qa,qb,qc,qd,tx,ty,tz")->required();
  density_cmd->callback([&] {
    const auto m = load_mixture(dargs.in_path, {});
    const double value = mopg::density(m, parse_pose(at));
    Json j;
    j["density"] = value;
    std::cout << j.dump() << "\n";
  });

  // --- mass ------------------------------------------------------------------
  auto* mass_cmd = app.add_subcommand("mass", "re-estimate normalization");
  CommonArgs massargs;
  massargs.n = mopg::kDefaultMassSamples;
  mass_cmd->add_option("--in", massargs.in_path, "mixture JSON")->required();
  mass_cmd->add_option("--n", massargs.n, "samples per element");
  mass_cmd->add_option("--seed", massargs.seed, "RNG seed");
  mass_cmd->add_option("--out", massargs.out_path, "report JSON");
  mass_cmd->callback([&] {
    const auto m = load_mixture(massargs.in_path, {massargs.n, massargs.seed});
    Json per = Json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
      Json e;
      e["index"] = i;
      e["stored_mass"] = m[i].element.mass;
      e["fresh_mass"] =
          mopg::estimate_mass(m[i].element.mean, m[i].element.cov, massargs.n,
                              mopg::derive_seed(massargs.seed, i));
      per.push_back(std::move(e));
    }
    Json j;
    j["elements"] = std::move(per);
    j["integral"] =
        mopg::to_json(mopg::mixture_mass(m, massargs.n, massargs.seed));
    write_or_print(massargs.out_path, j);
  });

  // --- distance --------------------------------------------------------------
  auto* dist_cmd = app.add_subcommand("distance", "squared L2 distance");
  CommonArgs diargs;
  diargs.n = 10000;
  std::vector<std::string> dist_inputs;
  dist_cmd->add_option("inputs", dist_inputs, "two mixture JSON files")
      ->expected(2);
  dist_cmd->add_option("--n", diargs.n, "MC sample count");
  dist_cmd->add_option("--seed", diargs.seed, "RNG seed");
  dist_cmd->add_option("--out", diargs.out_path, "estimate JSON");
  dist_cmd->callback([&] {
    const auto est = mopg::l2_distance_sq(load_mixture(dist_inputs[0], {}),
                                          load_mixture(dist_inputs[1], {}),
                                          diargs.n, diargs.seed);
    write_or_print(diargs.out_path, mopg::to_json(est));
  });

  // --- grasp-check -------------------------------------------------------------
  auto* grasp_cmd = app.add_subcommand("grasp-check", "grasp criterion");
  CommonArgs gargs;
  gargs.n = 10000;
  std::vector<std::string> grasp_inputs;
  double threshold_g = 0.0;
  double epsilon = 0.05;
  grasp_cmd->add_option("inputs", grasp_inputs,
                        "gripper and object mixture JSON files")
      ->expected(2);
  grasp_cmd->add_option("--g", threshold_g, "distance threshold G")->required();
  grasp_cmd->add_option("--epsilon", epsilon, "failure budget");
  grasp_cmd->add_option("--n", gargs.n, "MC sample count");
  grasp_cmd->add_option("--seed", gargs.seed, "RNG seed");
  grasp_cmd->callback([&] {
    mopg::GraspCriterion crit;
    crit.threshold_g = threshold_g;
    crit.epsilon = epsilon;
    crit.n = gargs.n;
    crit.seed = gargs.seed;
    const auto result = mopg::grasp_check(load_mixture(grasp_inputs[0], {}),
                                          load_mixture(grasp_inputs[1], {}),
                                          crit);
    Json j;
    j["pass"] = result.pass;
    j["distance"] = mopg::to_json(result.distance);
    std::cout << j.dump(2) << "\n";
  });

  // --- pipeline ----------------------------------------------------------------
  auto* pipe_cmd = app.add_subcommand("pipeline", "fuse/prune/merge loop");
  CommonArgs piargs;
  std::string config_path;
  std::string pipeline_report;
  bool seed_given = false;
  pipe_cmd->add_option("--config", config_path, "pipeline config JSON")
      ->required();
  pipe_cmd->add_option("--out", piargs.out_path, "final belief JSON");
  pipe_cmd->add_option("--report", pipeline_report, "per-stage report JSON");
  pipe_cmd->add_option("--seed", piargs.seed, "override the config seed")
      ->each([&](const std::string&) { seed_given = true; });
  pipe_cmd->callback([&] {
    const Json cfg_json = mopg::load_json_file(config_path);
    mopg::PipelineConfig cfg;
    cfg.prune_budget = cfg_json.value("prune_budget", 0.0);
    cfg.merge_target = cfg_json.value("merge_target", std::size_t{10});
    cfg.mass_samples =
        cfg_json.value("mass_samples", mopg::kDefaultMassSamples);
    cfg.integral_samples = cfg_json.value("integral_samples", std::int64_t{2000});
    cfg.seed = seed_given ? piargs.seed : cfg_json.value("seed", std::uint64_t{0});
    if (!cfg_json.contains("observations") ||
        !cfg_json["observations"].is_array() ||
        cfg_json["observations"].empty()) {
      throw mopg::ValidationError("pipeline config: observations required");
    }
    std::vector<mopg::Observation> observations;
    for (const auto& o : cfg_json["observations"]) {
      observations.push_back(
          mopg::observation_from_json(o, {cfg.mass_samples, cfg.seed}));
    }
    const auto result = mopg::run_pipeline(observations, cfg);
    write_or_print(piargs.out_path, mopg::to_json(result.belief));
    if (!pipeline_report.empty()) {
      mopg::save_json_file(pipeline_report, mopg::to_json(result));
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mopg::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mopg::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
