#include "rcbf/cli.hpp"

#include "rcbf/bounds.hpp"
#include "rcbf/error.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <algorithm>
#include <optional>

namespace rcbf::cli {

namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

std::ofstream open_csv(const fs::path& path, const char* header) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << std::setprecision(10) << header << '\n';
  return out;
}

nlohmann::json restart_json(const RestartResult& r) {
  return {{"index", r.index},
          {"initial_sigma", r.initial.sigma},
          {"initial_length", r.initial.length},
          {"initial_noise", r.initial.noise},
          {"final_sigma", r.final.sigma},
          {"final_length", r.final.length},
          {"final_noise", r.final.noise},
          {"initial_train_nll", r.initial_train_nll},
          {"final_train_nll", r.final_train_nll},
          {"holdout_nll", std::isfinite(r.holdout_nll) ? nlohmann::json(r.holdout_nll) : nlohmann::json(nullptr)},
          {"diverged", r.diverged},
          {"curve", r.curve}};
}

nlohmann::json report_json(const TrainReport& rep, std::size_t rows) {
  nlohmann::json rs = nlohmann::json::array();
  for (const RestartResult& r : rep.restarts) rs.push_back(restart_json(r));
  return {{"rows", rows},
          {"train_batches", rep.train_batches},
          {"holdout_batches", rep.holdout_batches},
          {"best_restart", rep.best},
          {"restarts", rs}};
}

MvgModel train_class(const RunConfig& cfg, const std::vector<Batch>& data, std::uint64_t seed,
                     TrainReport& rep) {
  MvgModel init(KernelParams{}, Eigen::Matrix4d::Identity(), cfg.scenario.window);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  return train(init, data, tc, &rep);
}

// Circle radius in a 2-D whitened plane holding the same probability as n sigma in 1-D.
double ellipse_radius(double n_sigma) { return std::sqrt(sigma_level_threshold(n_sigma, 2)); }

void write_ellipses(const fs::path& path) {
  auto out = open_csv(path, "level,index,x,y");
  constexpr int kPoints = 128;
  for (int level : {2, 3}) {
    const double r = ellipse_radius(level);
    for (int i = 0; i <= kPoints; ++i) {
      const double a = 2.0 * std::numbers::pi * i / kPoints;
      out << level << ',' << i << ',' << r * std::cos(a) << ',' << r * std::sin(a) << '\n';
    }
  }
}

void write_scatter(const fs::path& path, const std::vector<TrialRecord>& records) {
  auto out = open_csv(path, "mode,trial,sample,wv_x,wv_y,q,in_2sigma,in_3sigma");
  const double t2 = calibration_threshold(2.0);
  const double t3 = calibration_threshold(3.0);
  for (const TrialRecord& r : records) {
    for (std::size_t k = 0; k < r.calibration.size(); ++k) {
      const CalibrationSample& s = r.calibration[k];
      out << to_string(r.mode) << ',' << r.trial << ',' << k << ',' << s.wv(0) << ',' << s.wv(1)
          << ',' << s.q << ',' << (s.q <= t2 ? 1 : 0) << ',' << (s.q <= t3 ? 1 : 0) << '\n';
    }
  }
}

std::vector<TrialRecord> read_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open records file " + path.string());
  std::vector<TrialRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("records line " + std::to_string(out.size() + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

int cmd_train(const RunConfig& cfg, bool generate) {
  const fs::path dataset = output_root_path(cfg.dataset);
  const fs::path out_dir = output_root_path(cfg.output_dir);
  TrainingData data;
  if (fs::exists(dataset)) {
    data = training_data_from_json(read_json(dataset));
  } else if (generate) {
    std::cerr << "generating dataset " << dataset.string() << '\n';
    data = collect_training_data(cfg.scenario, cfg.episodes, cfg.episode_steps, cfg.batch_size,
                                 cfg.data_seed);
    write_json(dataset, to_json(data));
  } else {
    throw InvalidArgument("dataset " + dataset.string() + " not found (use --generate)");
  }
  if (data.robot.empty() || data.agent.empty()) throw InvalidArgument("dataset has an empty class");

  TrainReport robot_rep, agent_rep;
  ModelBundle bundle;
  bundle.robot = train_class(cfg, data.robot, cfg.train.seed, robot_rep);
  bundle.agent = train_class(cfg, data.agent, cfg.train.seed + 1, agent_rep);

  write_json(output_root_path(cfg.models), to_json(bundle));
  write_json(out_dir / "training_report.json",
             {{"format_version", 1},
              {"robot", report_json(robot_rep, data.robot_rows)},
              {"agent", report_json(agent_rep, data.agent_rows)}});
  write_json(out_dir / "resolved_config.json", to_json(cfg));
  for (const auto& [name, m] : {std::pair{"robot", &bundle.robot}, std::pair{"agent", &bundle.agent}}) {
    std::cerr << name << ": sigma " << m->kernel().sigma << " length " << m->kernel().length
              << " noise " << m->kernel().noise << '\n';
  }
  return kExitOk;
}

int cmd_run(const RunConfig& cfg) {
  const fs::path out_dir = output_root_path(cfg.output_dir);
  std::optional<ModelBundle> bundle;
  const bool needs_models =
      std::find(cfg.modes.begin(), cfg.modes.end(), FilterMode::robust) != cfg.modes.end();
  const fs::path models = output_root_path(cfg.models);
  if (fs::exists(models)) {
    bundle = bundle_from_json(read_json(models));
  } else if (needs_models) {
    throw InvalidArgument("robust mode needs a model file; " + models.string() + " not found");
  }
  const ModelBundle* mp = bundle ? &*bundle : nullptr;

  fs::create_directories(out_dir);
  write_json(out_dir / "resolved_config.json", to_json(cfg));
  const CampaignResult res = run_campaign(cfg.scenario, cfg.trials, cfg.modes, mp, cfg.jobs);

  std::vector<TrialRecord> all;
  for (FilterMode m : cfg.modes) {
    const auto& recs = res.records.at(m);
    std::ofstream lines(out_dir / ("records_" + to_string(m) + ".jsonl"));
    for (const TrialRecord& r : recs) lines << to_json(r).dump() << '\n';
    write_json(out_dir / ("summary_" + to_string(m) + ".json"), to_json(res.summaries.at(m)));
    all.insert(all.end(), recs.begin(), recs.end());
    const ModeSummary& s = res.summaries.at(m);
    std::cout << to_string(m) << ": trials " << s.trials << " collisions " << s.collisions
              << " rate " << s.collision_rate << " fallback " << s.fallback_rate << '\n';
  }
  write_scatter(out_dir / "calibration_scatter.csv", all);
  write_ellipses(out_dir / "ellipses.csv");

  auto traj = open_csv(out_dir / "trajectories.csv", "mode,trial,step,entity,x,y");
  TrialOptions topt;
  topt.keep_trajectory = true;
  topt.keep_calibration = false;
  for (FilterMode m : cfg.modes) {
    ScenarioConfig c = cfg.scenario;
    c.mode = m;
    for (int t = 0; t < std::min(cfg.trajectory_trials, cfg.trials); ++t) {
      const TrialRecord r = run_trial(c, mp, t, topt);
      for (const TrajectoryPoint& p : r.trajectory) {
        traj << to_string(m) << ',' << t << ',' << p.step << ',' << p.entity << ',' << p.p(0) << ','
             << p.p(1) << '\n';
      }
    }
  }
  return kExitOk;
}

int cmd_calibrate(const fs::path& records_path, const fs::path& out_dir) {
  const std::vector<TrialRecord> records = read_records(records_path);
  if (records.empty()) throw InvalidArgument("records file " + records_path.string() + " is empty");

  auto rows = open_csv(out_dir / "calibration_rows.csv",
                       "mode,trial,seed,samples,hits_2sigma,hits_3sigma,fraction_2sigma,fraction_3sigma");
  long n = 0, k2 = 0, k3 = 0;
  for (const TrialRecord& r : records) {
    n += r.calib_samples;
    k2 += r.calib_hits_2sigma;
    k3 += r.calib_hits_3sigma;
    const double s = std::max(1, r.calib_samples);
    rows << to_string(r.mode) << ',' << r.trial << ',' << r.seed << ',' << r.calib_samples << ','
         << r.calib_hits_2sigma << ',' << r.calib_hits_3sigma << ',' << r.calib_hits_2sigma / s << ','
         << r.calib_hits_3sigma / s << '\n';
  }
  write_scatter(out_dir / "calibration_scatter.csv", records);
  write_ellipses(out_dir / "ellipses.csv");

  auto level = [&](long k, double n_sigma) {
    const auto [lo, hi] = wilson_interval(k, n);
    return nlohmann::json{{"hits", k},
                          {"fraction", n > 0 ? static_cast<double>(k) / n : 0.0},
                          {"wilson_low", lo},
                          {"wilson_high", hi},
                          {"gaussian_reference", std::erf(n_sigma / std::sqrt(2.0))}};
  };
  const nlohmann::json report{{"format_version", 1},
                              {"records", records.size()},
                              {"samples", n},
                              {"dof", 4},
                              {"sigma2", level(k2, 2.0)},
                              {"sigma3", level(k3, 3.0)}};
  write_json(out_dir / "calibration_report.json", report);
  std::cout << "samples " << n << " 2sigma " << report["sigma2"]["fraction"] << " 3sigma "
            << report["sigma3"]["fraction"] << '\n';
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Robust multi-agent CBF safety filter: train, run, calibrate"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir, models_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "campaign / training seed");
    sub->add_option("-o,--output-dir", out_dir, "output directory");
    sub->add_option("--models", models_path, "model bundle path");
  };

  auto* train_cmd = app.add_subcommand("train", "fit MVG hyperparameters per behavior class");
  add_common(train_cmd);
  bool generate = false;
  std::optional<std::string> dataset;
  std::optional<int> steps, restarts;
  train_cmd->add_flag("--generate", generate, "synthesize the dataset if it is missing");
  train_cmd->add_option("--dataset", dataset, "dataset path");
  train_cmd->add_option("--steps", steps, "optimizer steps per restart");
  train_cmd->add_option("--restarts", restarts, "random restarts");

  auto* run_cmd = app.add_subcommand("run", "run a paired-seed campaign");
  add_common(run_cmd);
  std::vector<std::string> modes;
  std::optional<int> trials, jobs;
  run_cmd->add_option("--mode", modes, "robust|nominal|none (repeatable)")
      ->check(CLI::IsMember({"robust", "nominal", "none"}));
  run_cmd->add_option("--trials", trials, "number of paired trials")->check(CLI::PositiveNumber);
  run_cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* cal_cmd = app.add_subcommand("calibrate", "calibration report from a records file");
  std::string records_path;
  std::string cal_out = ".";
  cal_cmd->add_option("records", records_path, "records_<mode>.jsonl")->required();
  cal_cmd->add_option("-o,--output-dir", cal_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*cal_cmd) return cmd_calibrate(records_path, output_root_path(cal_out));

    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) {
      cfg.scenario.seed = *seed;
      cfg.train.seed = *seed;
      cfg.data_seed = *seed;
    }
    if (out_dir) cfg.output_dir = *out_dir;
    if (models_path) cfg.models = *models_path;
    if (dataset) cfg.dataset = *dataset;
    if (steps) cfg.train.steps = *steps;
    if (restarts) cfg.train.restarts = *restarts;
    if (trials) cfg.trials = *trials;
    if (jobs) cfg.jobs = *jobs;
    if (!modes.empty()) {
      cfg.modes.clear();
      for (const auto& m : modes) cfg.modes.push_back(filter_mode_from_string(m));
    }
    cfg = config_from_json(to_json(cfg));  // re-validate after overrides

    if (*train_cmd) return cmd_train(cfg, generate);
    return cmd_run(cfg);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const AssumptionViolated& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rcbf::cli
