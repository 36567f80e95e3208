#include "rcbf/error.hpp"
#include "rcbf/rng.hpp"
#include "rcbf/sim.hpp"

#include <cmath>

namespace rcbf {

std::string to_string(FilterMode m) {
  switch (m) {
    case FilterMode::robust: return "robust";
    case FilterMode::nominal: return "nominal";
    case FilterMode::none: return "none";
  }
  return "unknown";
}

FilterMode filter_mode_from_string(const std::string& s) {
  if (s == "robust") return FilterMode::robust;
  if (s == "nominal") return FilterMode::nominal;
  if (s == "none") return FilterMode::none;
  throw InvalidArgument("unknown filter mode '" + s + "'");
}

void ScenarioConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("ScenarioConfig: ") + what);
  };
  need(n_agents_min >= 3 && n_agents_max <= 12 && n_agents_min <= n_agents_max,
       "agent count range must lie within [3, 12]");
  need(arena > 0.0, "arena must be positive");
  need(blind_fraction >= 0.0 && blind_fraction <= 1.0, "blind_fraction must lie in [0, 1]");
  need(dt > 0.0, "dt must be positive");
  need(horizon >= 1, "horizon must be positive");
  need(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  barrier.validate();
  need(goal_radius > 0.0, "goal_radius must be positive");
  need(min_goal_distance >= 0.0 && min_goal_distance < 2.0 * std::sqrt(2.0) * arena,
       "min_goal_distance does not fit in the arena");
  need(activation_factor > 0.0, "activation_factor must be positive");
  need(ball_facets >= 8, "ball_facets must be >= 8");
  need(window >= 1, "window must be positive");
  need(u_max > 0.0 && robot_v_max > 0.0 && robot_kp > 0.0 && robot_kd > 0.0,
       "robot gains must be positive");
  need(robot_drag_nominal >= 0.0 && robot_drag_true >= 0.0 && robot_noise >= 0.0,
       "robot drag and noise must be nonnegative");
  need(agent_kp > 0.0 && agent_kd > 0.0 && agent_a_lim > 0.0 && agent_noise >= 0.0,
       "agent gains must be positive");
  need(agent_v_min > 0.0 && agent_v_min <= agent_v_max, "agent speed range");
  need(avoider_eta_min >= 0.0 && avoider_eta_max <= 1.0 && avoider_eta_min <= avoider_eta_max,
       "avoider eta range");
  need(avoider_ds_min > 0.0 && avoider_ds_min <= avoider_ds_max, "avoider margin range");
}

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

nlohmann::json to_json(const ScenarioConfig& c) {
  return {{"n_agents_min", c.n_agents_min},
          {"n_agents_max", c.n_agents_max},
          {"arena", c.arena},
          {"blind_fraction", c.blind_fraction},
          {"dt", c.dt},
          {"horizon", c.horizon},
          {"delta", c.delta},
          {"barrier",
           {{"d_s", c.barrier.d_s}, {"eta", c.barrier.eta}, {"a_max_floor", c.barrier.a_max_floor}}},
          {"seed", c.seed},
          {"mode", to_string(c.mode)},
          {"goal_radius", c.goal_radius},
          {"min_goal_distance", c.min_goal_distance},
          {"activation_factor", c.activation_factor},
          {"ball_facets", c.ball_facets},
          {"window", c.window},
          {"u_max", c.u_max},
          {"robot_drag_nominal", c.robot_drag_nominal},
          {"robot_drag_true", c.robot_drag_true},
          {"robot_boost", c.robot_boost},
          {"robot_noise", c.robot_noise},
          {"robot_kp", c.robot_kp},
          {"robot_kd", c.robot_kd},
          {"robot_v_max", c.robot_v_max},
          {"agent_kp", c.agent_kp},
          {"agent_kd", c.agent_kd},
          {"agent_a_lim", c.agent_a_lim},
          {"agent_noise", c.agent_noise},
          {"agent_v_min", c.agent_v_min},
          {"agent_v_max", c.agent_v_max},
          {"avoider_eta_min", c.avoider_eta_min},
          {"avoider_eta_max", c.avoider_eta_max},
          {"avoider_ds_min", c.avoider_ds_min},
          {"avoider_ds_max", c.avoider_ds_max}};
}

ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig c) {
  if (!j.is_object()) throw InvalidArgument("scenario config must be an object");
  try {
    read(j, "n_agents_min", c.n_agents_min);
    read(j, "n_agents_max", c.n_agents_max);
    read(j, "arena", c.arena);
    read(j, "blind_fraction", c.blind_fraction);
    read(j, "dt", c.dt);
    read(j, "horizon", c.horizon);
    read(j, "delta", c.delta);
    if (j.contains("barrier")) {
      const auto& b = j.at("barrier");
      read(b, "d_s", c.barrier.d_s);
      read(b, "eta", c.barrier.eta);
      read(b, "a_max_floor", c.barrier.a_max_floor);
    }
    read(j, "seed", c.seed);
    if (j.contains("mode")) c.mode = filter_mode_from_string(j.at("mode").get<std::string>());
    read(j, "goal_radius", c.goal_radius);
    read(j, "min_goal_distance", c.min_goal_distance);
    read(j, "activation_factor", c.activation_factor);
    read(j, "ball_facets", c.ball_facets);
    read(j, "window", c.window);
    read(j, "u_max", c.u_max);
    read(j, "robot_drag_nominal", c.robot_drag_nominal);
    read(j, "robot_drag_true", c.robot_drag_true);
    read(j, "robot_boost", c.robot_boost);
    read(j, "robot_noise", c.robot_noise);
    read(j, "robot_kp", c.robot_kp);
    read(j, "robot_kd", c.robot_kd);
    read(j, "robot_v_max", c.robot_v_max);
    read(j, "agent_kp", c.agent_kp);
    read(j, "agent_kd", c.agent_kd);
    read(j, "agent_a_lim", c.agent_a_lim);
    read(j, "agent_noise", c.agent_noise);
    read(j, "agent_v_min", c.agent_v_min);
    read(j, "agent_v_max", c.agent_v_max);
    read(j, "avoider_eta_min", c.avoider_eta_min);
    read(j, "avoider_eta_max", c.avoider_eta_max);
    read(j, "avoider_ds_min", c.avoider_ds_min);
    read(j, "avoider_ds_max", c.avoider_ds_max);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

int blind_count(int n, double fraction) {
  return static_cast<int>(std::floor(n * fraction + 0.5));
}

World spawn_scenario(const ScenarioConfig& cfg, std::uint64_t trial_seed) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(trial_seed, 0));
  std::uniform_real_distribution<double> coord(-cfg.arena, cfg.arena);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto point = [&] { return Eigen::Vector2d(coord(rng), coord(rng)); };

  World w;
  const int n = std::uniform_int_distribution<int>(cfg.n_agents_min, cfg.n_agents_max)(rng);
  const double min_sep = 2.0 * cfg.barrier.d_s;
  constexpr int kAttempts = 1000;

  int tries = 0;
  do {
    w.robot = AgentState(point(), Eigen::Vector2d::Zero());
    w.robot_goal = point();
    if (++tries > kAttempts) throw InvalidArgument("spawn_scenario: arena too small for the goal distance");
  } while ((w.robot_goal - w.robot.p).norm() < cfg.min_goal_distance);

  std::vector<Eigen::Vector2d> placed{w.robot.p};
  const int n_blind = blind_count(n, cfg.blind_fraction);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector2d p;
    bool ok = false;
    for (int t = 0; t < kAttempts && !ok; ++t) {
      p = point();
      ok = true;
      for (const auto& q : placed) {
        if ((p - q).norm() < min_sep) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) throw InvalidArgument("spawn_scenario: cannot place agents (arena too small)");
    placed.push_back(p);
    w.agents.emplace_back(p, Eigen::Vector2d::Zero());

    AgentSpec s;
    s.blind = i < n_blind;
    s.goal = point();
    s.v_max = cfg.agent_v_min + (cfg.agent_v_max - cfg.agent_v_min) * unit(rng);
    s.eta = cfg.avoider_eta_min + (cfg.avoider_eta_max - cfg.avoider_eta_min) * unit(rng);
    s.d_s = cfg.barrier.d_s *
            (cfg.avoider_ds_min + (cfg.avoider_ds_max - cfg.avoider_ds_min) * unit(rng));
    w.specs.push_back(s);
  }
  return w;
}

nlohmann::json to_json(const ModelBundle& b) {
  return {{"format_version", 1}, {"robot", to_json(b.robot)}, {"agent", to_json(b.agent)}};
}

ModelBundle bundle_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw InvalidArgument("unsupported model bundle format_version");
    }
    return {mvg_from_json(j.at("robot")), mvg_from_json(j.at("agent"))};
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed model bundle: ") + e.what());
  }
}

}  // namespace rcbf
