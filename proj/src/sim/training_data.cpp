#include "internal.hpp"

#include "rcbf/error.hpp"
#include "rcbf/rng.hpp"

namespace rcbf {

using namespace sim_detail;

namespace {

struct Series {
  std::vector<Eigen::Vector4d> x, y;
};

void cut(const Series& s, std::size_t batch_size, std::vector<Batch>& out, std::size_t& rows) {
  for (std::size_t start = 0; start < s.x.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, s.x.size() - start);
    Batch b;
    b.X.resize(static_cast<Eigen::Index>(len), 4);
    b.Y.resize(static_cast<Eigen::Index>(len), 4);
    for (std::size_t k = 0; k < len; ++k) {
      b.X.row(static_cast<Eigen::Index>(k)) = s.x[start + k].transpose();
      b.Y.row(static_cast<Eigen::Index>(k)) = s.y[start + k].transpose();
    }
    rows += len;
    out.push_back(std::move(b));
  }
}

}  // namespace

TrainingData collect_training_data(const ScenarioConfig& cfg_in, int n_episodes, int steps,
                                   std::size_t batch_size, std::uint64_t seed) {
  if (n_episodes < 1 || steps < 1 || batch_size < 1) {
    throw InvalidArgument("collect_training_data: episodes, steps and batch size must be positive");
  }
  ScenarioConfig cfg = cfg_in;
  cfg.mode = FilterMode::none;
  cfg.validate();
  const RobotDynamics dyn = nominal_robot(cfg);
  const RobotDynamics dyn_true = true_robot(cfg);
  const AgentModel cv = nominal_agent(cfg);

  TrainingData data;
  for (int e = 0; e < n_episodes; ++e) {
    const std::uint64_t es = derive_seed(seed, static_cast<std::uint64_t>(e));
    World w = spawn_scenario(cfg, es);
    const std::size_t n = w.agents.size();
    std::vector<std::mt19937_64> rngs;
    for (std::size_t i = 0; i < n; ++i) rngs.emplace_back(derive_seed(es, 100 + i));
    std::mt19937_64 robot_rng(derive_seed(es, 1));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> coord(-cfg.arena, cfg.arena);

    Series robot;
    std::vector<Series> agents(n);
    std::vector<AgentState> next;
    for (int t = 0; t < steps; ++t) {
      if ((w.robot.p - w.robot_goal).norm() < cfg.goal_radius) {
        w.robot_goal = Eigen::Vector2d(coord(robot_rng), coord(robot_rng));
      }
      const Control u = robot_desired(cfg, w);
      step_agents(cfg, w, rngs, next);
      Disturbance noise;
      const double nx = normal(robot_rng);
      const double ny = normal(robot_rng);
      noise.dv = cfg.dt * cfg.robot_noise * Eigen::Vector2d(nx, ny);
      const AgentState nr = step_robot(dyn_true, w.robot, u, noise);

      robot.x.push_back(w.robot.features());
      robot.y.push_back(extract_disturbance(dyn, w.robot, nr, u).stacked());
      for (std::size_t i = 0; i < n; ++i) {
        agents[i].x.push_back(w.agents[i].features());
        agents[i].y.push_back(extract_disturbance(cv, w.agents[i], next[i]).stacked());
      }
      w.robot = nr;
      w.agents = next;
    }
    cut(robot, batch_size, data.robot, data.robot_rows);
    for (const Series& s : agents) cut(s, batch_size, data.agent, data.agent_rows);
  }
  return data;
}

namespace {

nlohmann::json batches_json(const std::vector<Batch>& bs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Batch& b : bs) {
    nlohmann::json X = nlohmann::json::array();
    nlohmann::json Y = nlohmann::json::array();
    for (Eigen::Index r = 0; r < b.X.rows(); ++r) {
      X.push_back(std::vector<double>{b.X(r, 0), b.X(r, 1), b.X(r, 2), b.X(r, 3)});
      Y.push_back(std::vector<double>{b.Y(r, 0), b.Y(r, 1), b.Y(r, 2), b.Y(r, 3)});
    }
    arr.push_back({{"X", std::move(X)}, {"Y", std::move(Y)}});
  }
  return arr;
}

std::vector<Batch> batches_from(const nlohmann::json& arr, std::size_t& rows) {
  std::vector<Batch> out;
  for (const auto& jb : arr) {
    const auto X = jb.at("X").get<std::vector<std::vector<double>>>();
    const auto Y = jb.at("Y").get<std::vector<std::vector<double>>>();
    if (X.size() != Y.size() || X.empty()) throw InvalidArgument("dataset batch rows mismatch");
    Batch b;
    b.X.resize(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(X[0].size()));
    b.Y.resize(static_cast<Eigen::Index>(Y.size()), static_cast<Eigen::Index>(Y[0].size()));
    for (std::size_t r = 0; r < X.size(); ++r) {
      if (X[r].size() != static_cast<std::size_t>(b.X.cols()) ||
          Y[r].size() != static_cast<std::size_t>(b.Y.cols())) {
        throw InvalidArgument("dataset batch has ragged rows");
      }
      for (std::size_t c = 0; c < X[r].size(); ++c) b.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = X[r][c];
      for (std::size_t c = 0; c < Y[r].size(); ++c) b.Y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = Y[r][c];
    }
    rows += X.size();
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const TrainingData& d) {
  return {{"format_version", 1}, {"robot", batches_json(d.robot)}, {"agent", batches_json(d.agent)}};
}

TrainingData training_data_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw InvalidArgument("unsupported dataset format_version");
    }
    TrainingData d;
    d.robot = batches_from(j.at("robot"), d.robot_rows);
    d.agent = batches_from(j.at("agent"), d.agent_rows);
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed dataset: ") + e.what());
  }
}

}  // namespace rcbf
