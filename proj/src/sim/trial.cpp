#include "internal.hpp"

#include "rcbf/bounds.hpp"
#include "rcbf/error.hpp"
#include "rcbf/rng.hpp"
#include "rcbf/robustqp.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rcbf {

using namespace sim_detail;

std::uint64_t trial_seed(std::uint64_t campaign_seed, int trial_index) {
  return derive_seed(campaign_seed, static_cast<std::uint64_t>(trial_index));
}

double calibration_threshold(double n_sigma) { return sigma_level_threshold(n_sigma, 4); }

namespace {

MvgModel fresh_window(const MvgModel& m, std::size_t capacity) {
  return MvgModel(m.kernel(), m.omega(), capacity, m.relative_jitter());
}

// Per active agent data kept from the control decision to the post-step checks.
struct ActivePair {
  std::size_t agent = 0;
  double a_max = 0.0;
  UncertaintyPolytope poly;
};

double min_separation(const World& w) {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& a : w.agents) s = std::min(s, (a.p - w.robot.p).norm());
  return s;
}

}  // namespace

TrialRecord run_trial(const ScenarioConfig& cfg, const ModelBundle* models, int trial_index,
                      const TrialOptions& opts) {
  cfg.validate();
  const bool robust = cfg.mode == FilterMode::robust;
  if (robust && !models) throw InvalidArgument("run_trial: robust mode needs trained models");

  TrialRecord rec;
  rec.trial = trial_index;
  rec.seed = trial_seed(cfg.seed, trial_index);
  rec.mode = cfg.mode;

  World w = opts.initial_world ? *opts.initial_world : spawn_scenario(cfg, rec.seed);
  const std::size_t n = w.agents.size();
  if (w.specs.size() != n) throw InvalidArgument("run_trial: one spec per agent is required");
  rec.n_agents = static_cast<int>(n);

  std::vector<std::mt19937_64> agent_rngs;
  for (std::size_t i = 0; i < n; ++i) agent_rngs.emplace_back(derive_seed(rec.seed, 100 + i));
  std::mt19937_64 robot_rng(derive_seed(rec.seed, 1));
  std::normal_distribution<double> normal(0.0, 1.0);

  const RobotDynamics dyn = nominal_robot(cfg);
  const RobotDynamics dyn_true = true_robot(cfg);
  const AgentModel cv = nominal_agent(cfg);
  const double scale = std::cos(std::numbers::pi / cfg.ball_facets);
  const double u_inner = cfg.u_max * scale;
  const double thr2 = calibration_threshold(2.0);
  const double thr3 = calibration_threshold(3.0);
  const double d_s = cfg.barrier.d_s;
  const double eta = cfg.barrier.eta;

  std::optional<MvgModel> robot_model;
  std::vector<MvgModel> agent_models;
  if (robust) {
    robot_model = fresh_window(models->robot, cfg.window);
    agent_models.assign(n, fresh_window(models->agent, cfg.window));
  }

  double min_sep = min_separation(w);
  auto push_traj = [&](int step) {
    if (!opts.keep_trajectory) return;
    rec.trajectory.push_back({step, -1, w.robot.p});
    for (std::size_t i = 0; i < n; ++i) rec.trajectory.push_back({step, static_cast<int>(i), w.agents[i].p});
  };
  push_traj(0);
  if (min_sep < d_s) rec.collided = true;

  std::vector<DisturbancePosterior> post_a(n);
  DisturbancePosterior post_r;
  std::vector<AgentState> next_agents;
  std::vector<ActivePair> active;

  for (int t = 0; t < cfg.horizon && !rec.collided; ++t) {
    if (robust) {
      post_r = robot_model->posterior(w.robot.features());
      for (std::size_t i = 0; i < n; ++i) post_a[i] = agent_models[i].posterior(w.agents[i].features());
    }

    const Control u_des = robot_desired(cfg, w);
    Control u = u_des;
    bool optimal = false;
    active.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if ((w.agents[i].p - w.robot.p).norm() <= cfg.activation_radius()) active.push_back({i, 0.0, {}});
    }

    if (cfg.mode != FilterMode::none && !active.empty()) {
      bool fallback = false;
      try {
        std::vector<AgentConstraint> blocks;
        for (ActivePair& ap : active) {
          const AgentState& xa = w.agents[ap.agent];
          ZetaBounds zr, za;
          if (robust) {
            ap.poly = to_polytope(build_ellipsoid(post_r, post_a[ap.agent], cfg.delta));
            const auto z = zeta_from_box(ap.poly);
            zr = z[0];
            za = z[1];
          } else {
            ap.poly = zero_polytope(8, {4, 4});
          }
          ap.a_max = a_max_compute(dyn, cv, w.robot, xa, zr.zeta_v, za.zeta_v, scale);
          const CbcCoefficients c =
              cbc_coefficients(dyn, cv, w.robot, xa, zr, za, ap.a_max, cfg.barrier, cfg.u_max);
          blocks.push_back({c, ap.poly});
        }
        const RobustProgram prog = assemble(u_des, std::move(blocks), cfg.u_max, cfg.ball_facets);
        const QpSolution sol = solve(prog);
        ++rec.qp_solves;
        if (sol.status == QpStatus::optimal) {
          u = clamp_norm(sol.u, u_inner);
          optimal = true;
        } else {
          ++rec.qp_nonoptimal;
          ++rec.fallback_qp;
          fallback = true;
        }
      } catch (const InfeasibleGeometry&) {
        ++rec.fallback_geometry;
        fallback = true;
      } catch (const AssumptionViolated&) {
        ++rec.fallback_assumption;
        fallback = true;
      } catch (const Error&) {
        fallback = true;
      }
      if (fallback) {
        ++rec.fallback_events;
        u = brake(dyn.f(w.robot).v, dyn.g_v(w.robot), u_inner);
      }
    }

    step_agents(cfg, w, agent_rngs, next_agents);
    Disturbance noise;
    const double nx = normal(robot_rng);
    const double ny = normal(robot_rng);
    noise.dv = cfg.dt * cfg.robot_noise * Eigen::Vector2d(nx, ny);
    const AgentState next_robot = step_robot(dyn_true, w.robot, u, noise);

    if (robust) {
      const Disturbance d_r = extract_disturbance(dyn, w.robot, next_robot, u);
      std::vector<Eigen::Vector4d> d_a(n);
      for (std::size_t i = 0; i < n; ++i) {
        d_a[i] = extract_disturbance(cv, w.agents[i], next_agents[i]).stacked();
        const double q = mahalanobis_sq(d_a[i], post_a[i].mean, post_a[i].cov);
        ++rec.calib_samples;
        if (q <= thr2) ++rec.calib_hits_2sigma;
        if (q <= thr3) ++rec.calib_hits_3sigma;
        if (opts.keep_calibration) {
          CalibrationSample cs;
          cs.q = q;
          cs.wv = whiten(d_a[i].tail<2>(), post_a[i].mean.tail<2>(),
                         post_a[i].cov.bottomRightCorner<2, 2>());
          rec.calibration.push_back(cs);
        }
      }
      for (const ActivePair& ap : active) {
        if (ap.poly.G.rows() == 0) continue;
        Stacked8 d8;
        d8 << d_r.stacked(), d_a[ap.agent];
        const bool inside = ap.poly.contains(d8, 1e-9);
        ++rec.active_pairs;
        if (!inside) ++rec.polytope_outside;
        if (optimal && inside) {
          const AgentState& xa = w.agents[ap.agent];
          const AgentState& xn = next_agents[ap.agent];
          const double h_t = h_value(w.robot.p - xa.p, w.robot.v - xa.v, ap.a_max, cfg.barrier);
          const double h_n = h_value(next_robot.p - xn.p, next_robot.v - xn.v, ap.a_max, cfg.barrier);
          const double margin = h_n + (eta - 1.0) * h_t;
          if (rec.certified_checks == 0 || margin < rec.worst_certified_margin) {
            rec.worst_certified_margin = margin;
          }
          ++rec.certified_checks;
          if (margin < -1e-6) ++rec.certified_violations;
        }
      }
      robot_model->observe_inplace(w.robot.features(), d_r.stacked());
      for (std::size_t i = 0; i < n; ++i) agent_models[i].observe_inplace(w.agents[i].features(), d_a[i]);
    }

    w.robot = next_robot;
    w.agents = next_agents;
    rec.steps = t + 1;
    push_traj(t + 1);
    const double sep = min_separation(w);
    min_sep = std::min(min_sep, sep);
    if (sep < d_s) rec.collided = true;
    if ((w.robot.p - w.robot_goal).norm() < cfg.goal_radius) {
      rec.reached_goal = true;
      break;
    }
  }

  rec.min_separation = min_sep;
  rec.distance_to_collision = (min_sep - d_s) + d_s;
  return rec;
}

}  // namespace rcbf
