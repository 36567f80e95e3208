#pragma once

#include "rcbf/mvg.hpp"
#include "rcbf/sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace rcbf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Every knob of the three commands. Precedence: built-in defaults, then
/// the config file, then command-line flags.
struct RunConfig {
  ScenarioConfig scenario;
  TrainConfig train;

  int episodes = 24;
  int episode_steps = 300;
  std::size_t batch_size = 50;
  std::uint64_t data_seed = 7;

  std::string dataset = "dataset.json";
  std::string models = "models.json";
  std::string output_dir = "out";

  int trials = 200;
  std::vector<FilterMode> modes{FilterMode::robust, FilterMode::nominal};
  int jobs = 1;
  int trajectory_trials = 3;
};

nlohmann::json to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Resolves a relative path against RCBF_OUTPUT_ROOT when it is set.
std::filesystem::path output_root_path(const std::string& p);

/// Wilson score interval for k successes out of n at the given z.
std::pair<double, double> wilson_interval(long k, long n, double z = 1.959963984540054);

int cmd_train(const RunConfig& cfg, bool generate);
int cmd_run(const RunConfig& cfg);
int cmd_calibrate(const std::filesystem::path& records, const std::filesystem::path& out_dir);

/// Parses argv, dispatches, and maps failures to exit codes.
int run_cli(int argc, char** argv);

}  // namespace rcbf::cli
