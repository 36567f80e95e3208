#pragma once

#include "rcbf/cbf.hpp"
#include "rcbf/core.hpp"
#include "rcbf/mvg.hpp"
#include "rcbf/qp.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rcbf {

enum class FilterMode { robust, nominal, none };

std::string to_string(FilterMode m);
FilterMode filter_mode_from_string(const std::string& s);

struct ScenarioConfig {
  // scene
  int n_agents_min = 3;
  int n_agents_max = 12;
  double arena = 10.0;  ///< half-width of the square arena [m]
  double blind_fraction = 0.5;
  double dt = 0.1;
  int horizon = 400;
  double delta = 0.05;
  BarrierParams barrier{1.0, 0.5, 0.0};
  std::uint64_t seed = 1;
  FilterMode mode = FilterMode::robust;
  double goal_radius = 0.5;
  double min_goal_distance = 10.0;
  double activation_factor = 6.0;  ///< activation radius in units of D_s
  int ball_facets = 16;
  std::size_t window = MvgModel::kDefaultCapacity;

  // robot
  double u_max = 12.0;
  double robot_drag_nominal = 0.1;
  double robot_drag_true = 0.2;
  double robot_boost = 0.2;
  double robot_noise = 0.05;  ///< velocity process noise [m/s^2]
  double robot_kp = 1.0;
  double robot_kd = 1.4;
  double robot_v_max = 1.5;

  // agents
  double agent_kp = 1.0;
  double agent_kd = 1.4;
  double agent_a_lim = 1.5;
  double agent_noise = 0.2;  ///< acceleration process noise [m/s^2]
  double agent_v_min = 0.5;
  double agent_v_max = 1.2;
  double avoider_eta_min = 0.2;
  double avoider_eta_max = 0.8;
  double avoider_ds_min = 0.8;  ///< as a fraction of D_s
  double avoider_ds_max = 1.2;

  void validate() const;
  double activation_radius() const { return activation_factor * barrier.d_s; }
};

nlohmann::json to_json(const ScenarioConfig& c);
/// Starts from `base` and overrides any field present in `j`.
ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig base = {});

struct AgentSpec {
  bool blind = true;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  double v_max = 1.0;
  double eta = 0.5;
  double d_s = 1.0;
};

struct World {
  AgentState robot;
  Eigen::Vector2d robot_goal = Eigen::Vector2d::Zero();
  std::vector<AgentState> agents;
  std::vector<AgentSpec> specs;
};

/// Places the robot, its goal and the agents uniformly in the arena with
/// pairwise initial separation >= 2 D_s. Deterministic in `trial_seed`.
World spawn_scenario(const ScenarioConfig& cfg, std::uint64_t trial_seed);

/// Number of blind agents among n (round half up).
int blind_count(int n, double fraction);

/// Trained hyperparameters per behavior class.
struct ModelBundle {
  MvgModel robot;
  MvgModel agent;
};

nlohmann::json to_json(const ModelBundle& b);
ModelBundle bundle_from_json(const nlohmann::json& j);

struct CalibrationSample {
  double q = 0.0;  ///< squared Mahalanobis distance of the agent disturbance (4 dof)
  Eigen::Vector2d wv = Eigen::Vector2d::Zero();  ///< whitened velocity part
};

struct TrajectoryPoint {
  int step = 0;
  int entity = -1;  ///< -1 robot, otherwise agent index
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
};

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  FilterMode mode = FilterMode::robust;
  int n_agents = 0;
  bool collided = false;
  bool reached_goal = false;
  double min_separation = 0.0;
  double distance_to_collision = 0.0;
  int steps = 0;
  int fallback_events = 0;
  int fallback_qp = 0;          ///< QP not optimal
  int fallback_geometry = 0;    ///< separation or denominators out of range
  int fallback_assumption = 0;  ///< a_max not positive
  int qp_solves = 0;
  int qp_nonoptimal = 0;
  int active_pairs = 0;          ///< (step, active agent) pairs
  int polytope_outside = 0;      ///< of active_pairs, realized d outside its polytope
  int certified_checks = 0;      ///< optimal step with d inside the polytope
  int certified_violations = 0;
  double worst_certified_margin = 0.0;  ///< min over checks of CBC value
  int calib_samples = 0;
  int calib_hits_2sigma = 0;
  int calib_hits_3sigma = 0;
  std::vector<CalibrationSample> calibration;
  std::vector<TrajectoryPoint> trajectory;  ///< not serialized
};

struct TrialOptions {
  bool keep_trajectory = false;
  bool keep_calibration = true;
  /// Scripted start in place of spawn_scenario; agent count comes from it.
  std::optional<World> initial_world;
};

/// Thresholds for the 2 sigma / 3 sigma calibration flags (4 dof).
double calibration_threshold(double n_sigma);

/// One closed-loop episode. `models` may be null unless mode is robust.
TrialRecord run_trial(const ScenarioConfig& cfg, const ModelBundle* models, int trial_index,
                      const TrialOptions& opts = {});

/// Seed of trial i, identical for every mode.
std::uint64_t trial_seed(std::uint64_t campaign_seed, int trial_index);

struct ModeSummary {
  FilterMode mode = FilterMode::robust;
  int trials = 0;
  int collisions = 0;
  double collision_rate = 0.0;
  double dtc_mean = 0.0;
  double dtc_std = 0.0;
  int reached_goal = 0;
  long total_steps = 0;
  long fallback_events = 0;
  long fallback_qp = 0;
  long fallback_geometry = 0;
  long fallback_assumption = 0;
  double fallback_rate = 0.0;
  long active_pairs = 0;
  long polytope_outside = 0;
  double outside_fraction = 0.0;
  long certified_checks = 0;
  long certified_violations = 0;
  long calib_samples = 0;
  double calib_2sigma = 0.0;
  double calib_3sigma = 0.0;
  std::vector<std::uint64_t> seeds;
};

ModeSummary summarize(FilterMode mode, const std::vector<TrialRecord>& records);

struct CampaignResult {
  std::map<FilterMode, std::vector<TrialRecord>> records;
  std::map<FilterMode, ModeSummary> summaries;
};

/// Runs n_trials paired seeds for every mode, on up to `jobs` threads.
CampaignResult run_campaign(const ScenarioConfig& cfg, int n_trials,
                            const std::vector<FilterMode>& modes, const ModelBundle* models,
                            int jobs = 1, const TrialOptions& opts = {});

struct TrainingData {
  std::vector<Batch> robot;
  std::vector<Batch> agent;
  std::size_t robot_rows = 0;
  std::size_t agent_rows = 0;
};

/// Unfiltered episodes of `steps` steps; residuals against the nominal
/// models, cut into consecutive batches of `batch_size` rows per entity.
TrainingData collect_training_data(const ScenarioConfig& cfg, int n_episodes, int steps,
                                   std::size_t batch_size, std::uint64_t seed);

nlohmann::json to_json(const TrainingData& d);
TrainingData training_data_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrialRecord& r);
TrialRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModeSummary& s);

}  // namespace rcbf
