#include "rcbf/cli.hpp"

#include "rcbf/error.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

namespace rcbf::cli {

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
  std::vector<std::string> modes;
  for (FilterMode m : c.modes) modes.push_back(to_string(m));
  return {{"scenario", to_json(c.scenario)},
          {"train",
           {{"learning_rate", c.train.learning_rate},
            {"steps", c.train.steps},
            {"restarts", c.train.restarts},
            {"holdout_fraction", c.train.holdout_fraction},
            {"seed", c.train.seed},
            {"record_every", c.train.record_every},
            {"learn_noise", c.train.learn_noise}}},
          {"data",
           {{"episodes", c.episodes},
            {"episode_steps", c.episode_steps},
            {"batch_size", c.batch_size},
            {"seed", c.data_seed}}},
          {"paths", {{"dataset", c.dataset}, {"models", c.models}, {"output_dir", c.output_dir}}},
          {"run",
           {{"trials", c.trials},
            {"modes", modes},
            {"jobs", c.jobs},
            {"trajectory_trials", c.trajectory_trials}}}};
}

RunConfig config_from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  try {
    if (j.contains("scenario")) c.scenario = scenario_from_json(j.at("scenario"), c.scenario);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      read(t, "learning_rate", c.train.learning_rate);
      read(t, "steps", c.train.steps);
      read(t, "restarts", c.train.restarts);
      read(t, "holdout_fraction", c.train.holdout_fraction);
      read(t, "seed", c.train.seed);
      read(t, "record_every", c.train.record_every);
      read(t, "learn_noise", c.train.learn_noise);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      read(d, "episodes", c.episodes);
      read(d, "episode_steps", c.episode_steps);
      read(d, "batch_size", c.batch_size);
      read(d, "seed", c.data_seed);
    }
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      read(p, "dataset", c.dataset);
      read(p, "models", c.models);
      read(p, "output_dir", c.output_dir);
    }
    if (j.contains("run")) {
      const auto& r = j.at("run");
      read(r, "trials", c.trials);
      read(r, "jobs", c.jobs);
      read(r, "trajectory_trials", c.trajectory_trials);
      if (r.contains("modes")) {
        c.modes.clear();
        for (const auto& m : r.at("modes")) c.modes.push_back(filter_mode_from_string(m.get<std::string>()));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  if (c.trials < 1) throw InvalidArgument("config: trials must be >= 1");
  if (c.jobs < 1) throw InvalidArgument("config: jobs must be >= 1");
  if (c.modes.empty()) throw InvalidArgument("config: at least one mode is required");
  if (c.episodes < 1 || c.episode_steps < 1 || c.batch_size < 1) {
    throw InvalidArgument("config: data section needs positive sizes");
  }
  c.scenario.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::filesystem::path output_root_path(const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("RCBF_OUTPUT_ROOT"); root && *root) {
    return std::filesystem::path(root) / path;
  }
  return path;
}

std::pair<double, double> wilson_interval(long k, long n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double den = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / den;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / den;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

}  // namespace rcbf::cli
