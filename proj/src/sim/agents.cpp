#include "internal.hpp"

#include "rcbf/error.hpp"
#include "rcbf/robustqp.hpp"

#include <cmath>
#include <numbers>

namespace rcbf::sim_detail {

Eigen::Vector2d clamp_norm(const Eigen::Vector2d& v, double r) {
  const double n = v.norm();
  return n > r ? Eigen::Vector2d(v * (r / n)) : v;
}

Eigen::Vector2d pd_command(const AgentState& x, const Eigen::Vector2d& goal, double kp,
                           double kd, double v_max) {
  const Eigen::Vector2d e = clamp_norm(goal - x.p, v_max * kd / kp);
  return kp * e - kd * x.v;
}

Eigen::Vector2d brake(const Eigen::Vector2d& v_free, const Eigen::Matrix2d& g_v, double limit) {
  return clamp_norm(-g_v.partialPivLu().solve(v_free), limit);
}

RobotDynamics nominal_robot(const ScenarioConfig& cfg) {
  return RobotDynamics::damped_double_integrator(cfg.dt, cfg.u_max, cfg.robot_drag_nominal,
                                                 cfg.robot_boost);
}

RobotDynamics true_robot(const ScenarioConfig& cfg) {
  return RobotDynamics::damped_double_integrator(cfg.dt, cfg.u_max, cfg.robot_drag_true,
                                                 cfg.robot_boost);
}

AgentModel nominal_agent(const ScenarioConfig& cfg) {
  return AgentModel::constant_velocity(cfg.dt);
}

AgentState agent_true_step(const AgentState& x, const Eigen::Vector2d& a, double dt) {
  AgentState n = x;
  n.v = x.v + dt * a;
  n.p = x.p + dt * n.v;
  return n;
}

Eigen::Vector2d avoider_filter(const ScenarioConfig& cfg, const AgentState& self,
                               const AgentSpec& spec, const Eigen::Vector2d& a_des,
                               const std::vector<AgentState>& others) {
  const double lim = cfg.agent_a_lim;
  const RobotDynamics dyn = RobotDynamics::double_integrator(cfg.dt, lim);
  const AgentModel cv = AgentModel::constant_velocity(cfg.dt);
  const BarrierParams params{spec.d_s, spec.eta, 0.0};
  const double scale = std::cos(std::numbers::pi / cfg.ball_facets);
  const double radius = cfg.activation_factor * spec.d_s;

  QpProblem qp;
  qp.Q = Eigen::Matrix2d::Identity();
  qp.c = -a_des;
  qp.A.resize(0, 2);
  qp.b.resize(0);
  std::vector<Eigen::RowVector2d> rows;
  std::vector<double> rhs;
  for (int k = 0; k < cfg.ball_facets; ++k) {
    const double th = 2.0 * std::numbers::pi * k / cfg.ball_facets;
    rows.emplace_back(std::cos(th), std::sin(th));
    rhs.push_back(lim * scale);
  }
  try {
    for (const AgentState& o : others) {
      if ((o.p - self.p).norm() > radius) continue;
      const double a_max = a_max_compute(dyn, cv, self, o, 0.0, 0.0, scale);
      const CbcCoefficients c =
          cbc_coefficients(dyn, cv, self, o, ZetaBounds{}, ZetaBounds{}, a_max, params, lim);
      rows.push_back(c.h3);
      rhs.push_back(c.k_c);
    }
  } catch (const Error&) {
    return brake(self.v, cfg.dt * Eigen::Matrix2d::Identity(), lim);
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  qp.C.resize(m, 2);
  qp.d.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    qp.C.row(i) = rows[static_cast<std::size_t>(i)];
    qp.d(i) = rhs[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d start = clamp_norm(a_des, lim * scale);
  if (((qp.C * start - qp.d).array() <= 0.0).all()) return start;
  const QpResult r = solve_qp(qp);
  if (r.status != QpStatus::optimal) return brake(self.v, cfg.dt * Eigen::Matrix2d::Identity(), lim);
  return clamp_norm(r.x_head, lim);
}

void step_agents(const ScenarioConfig& cfg, World& w, std::vector<std::mt19937_64>& rngs,
                 std::vector<AgentState>& next) {
  const std::size_t n = w.agents.size();
  next.resize(n);
  std::uniform_real_distribution<double> coord(-cfg.arena, cfg.arena);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<AgentState> others;
  for (std::size_t i = 0; i < n; ++i) {
    AgentSpec& s = w.specs[i];
    std::mt19937_64& rng = rngs[i];
    if ((w.agents[i].p - s.goal).norm() < cfg.goal_radius) {
      s.goal = Eigen::Vector2d(coord(rng), coord(rng));
    }
    Eigen::Vector2d a = clamp_norm(
        pd_command(w.agents[i], s.goal, cfg.agent_kp, cfg.agent_kd, s.v_max), cfg.agent_a_lim);
    if (!s.blind) {
      others.clear();
      others.push_back(w.robot);
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) others.push_back(w.agents[j]);
      }
      a = avoider_filter(cfg, w.agents[i], s, a, others);
    }
    const double nx = noise(rng);
    const double ny = noise(rng);
    a += cfg.agent_noise * Eigen::Vector2d(nx, ny);
    next[i] = agent_true_step(w.agents[i], a, cfg.dt);
  }
}

Control robot_desired(const ScenarioConfig& cfg, const World& w) {
  const Control u = pd_command(w.robot, w.robot_goal, cfg.robot_kp, cfg.robot_kd, cfg.robot_v_max);
  return clamp_norm(u, cfg.u_max * std::cos(std::numbers::pi / cfg.ball_facets));
}

}  // namespace rcbf::sim_detail
