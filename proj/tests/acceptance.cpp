// Acceptance run: one PASS/FAIL line per headline criterion, nonzero exit on any FAIL.

#include "support.hpp"

#include "rcbf/cli.hpp"
#include "rcbf/error.hpp"
#include "rcbf/sim.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <string>
#include <thread>

using namespace rcbf;
using namespace rcbf::test;

namespace {

int failures = 0;

void report(bool pass, const char* name, const std::string& detail) {
  std::printf("%s  %-22s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModeSummary robust_summary;

void campaign(int trials, int jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  const cli::RunConfig cfg;
  const TrainingData data =
      collect_training_data(cfg.scenario, cfg.episodes, cfg.episode_steps, cfg.batch_size, cfg.data_seed);
  const MvgModel init(KernelParams{}, Eigen::Matrix4d::Identity(), cfg.scenario.window);
  TrainConfig tc = cfg.train;
  ModelBundle models;
  models.robot = train(init, data.robot, tc);
  tc.seed = cfg.train.seed + 1;
  models.agent = train(init, data.agent, tc);

  const CampaignResult res =
      run_campaign(cfg.scenario, trials, {FilterMode::robust, FilterMode::nominal}, &models, jobs);
  const double elapsed = seconds_since(t0);
  robust_summary = res.summaries.at(FilterMode::robust);
  const ModeSummary& nom = res.summaries.at(FilterMode::nominal);
  const double r = robust_summary.collision_rate, n = nom.collision_rate;
  report(trials >= 200 && r <= 0.05 && n >= 2.0 * r && elapsed <= 600.0, "safety_rate",
         fmt("trials=%d robust=%.3f (%d) nominal=%.3f (%d) fallback_rate=%.4f runtime=%.1fs", trials, r,
             robust_summary.collisions, n, nom.collisions, robust_summary.fallback_rate, elapsed));

  const double delta = cfg.scenario.delta;
  report(robust_summary.certified_violations == 0 && robust_summary.outside_fraction <= delta + 0.03,
         "certified_step",
         fmt("checks=%ld violations=%ld outside=%ld/%ld (%.4f, limit %.2f)", robust_summary.certified_checks,
             robust_summary.certified_violations, robust_summary.polytope_outside, robust_summary.active_pairs,
             robust_summary.outside_fraction, delta + 0.03));

  const double c2 = robust_summary.calib_2sigma, c3 = robust_summary.calib_3sigma;
  report(robust_summary.calib_samples >= 10000 && std::abs(c2 - 0.97) <= 0.03 && std::abs(c3 - 0.99) <= 0.03,
         "calibration", fmt("samples=%ld 2sigma=%.4f 3sigma=%.4f", robust_summary.calib_samples, c2, c3));
}

void bound_validity() {
  Rng rng(1001);
  const double u_max = ScenarioConfig{}.u_max;
  const double scale = std::cos(std::numbers::pi / 16);
  const RobotDynamics dyn = RobotDynamics::damped_double_integrator(0.1, u_max, 0.1, 0.2);
  const AgentModel cv = AgentModel::constant_velocity(0.1);
  int valid = 0, violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  while (valid < 10000) {
    const BoundSample s = draw_bound_sample(rng, u_max);
    double a = 0.0;
    CbcCoefficients c;
    try {
      a = a_max_compute(dyn, cv, s.x, s.xh, s.zr.zeta_v, s.za.zeta_v, scale);
      c = cbc_coefficients(dyn, cv, s.x, s.xh, s.zr, s.za, a, s.params);
    } catch (const AssumptionViolated&) {
      continue;
    } catch (const InfeasibleGeometry&) {
      continue;
    }
    // k_c - H1 d - u^T H2 d - H3 u, written out from the coefficient blocks.
    const double bound = c.k_c - c.h1.dot(s.d) - s.u.dot(c.h2 * s.d) - c.h3.dot(s.u);
    const double gap = cbc_exact(dyn, cv, s.x, s.xh, s.u, s.d, a, s.params) - bound;
    worst = std::min(worst, gap);
    if (gap < -1e-9) ++violations;
    ++valid;
  }
  report(violations == 0, "bound_validity", fmt("samples=%d violations=%d min_gap=%.3e", valid, violations, worst));
}

AgentConstraint certified_block(Rng& rng, const Control& anchor, double margin) {
  AgentConstraint b{random_coefficients(rng), random_polytope(rng, uniform(rng, 0.01, 0.3))};
  b.coeffs.k_c = vertex_worst_case(anchor, b) + margin;
  return b;
}

void duality(double u_max) {
  Rng rng(1002);
  int optimal = 0, false_infeasible = 0, other = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 500; ++rep) {
    const Control anchor = in_disc(rng, 0.8 * polygon_inner_radius(u_max, 16));
    std::vector<AgentConstraint> blocks;
    for (int i = 0; i < 1 + rep % 4; ++i) blocks.push_back(certified_block(rng, anchor, 1e-4));
    const RobustProgram prog = assemble(in_disc(rng, 1.5 * u_max), blocks, u_max, 16);
    const QpSolution s = solve(prog);
    if (s.status == QpStatus::infeasible) {
      ++false_infeasible;
      continue;
    }
    if (s.status != QpStatus::optimal) {
      ++other;
      continue;
    }
    ++optimal;
    for (const AgentConstraint& b : prog.blocks) worst = std::max(worst, vertex_worst_case(s.u, b) - b.coeffs.k_c);
  }
  report(optimal == 500 && worst <= 1e-7, "duality",
         fmt("programs=500 optimal=%d false_infeasible=%d max_iter=%d max_residual=%.3e", optimal,
             false_infeasible, other, worst));
}

void polytope() {
  Rng rng(1003);
  double worst_out = -1.0, worst_tight = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(8, 8);
    cov.topLeftCorner(4, 4) = random_spd(rng, 4, 1e-3, 2.0);
    cov.bottomRightCorner(4, 4) = random_spd(rng, 4, 1e-3, 2.0);
    const ConfidenceEllipsoid e = make_ellipsoid(uniform_vec(rng, 8, -1, 1), cov, chi2_quantile(0.95, 8), {4, 4});
    const UncertaintyPolytope poly = to_polytope(e);
    for (int s = 0; s < 1000; ++s) worst_out = std::max(worst_out, (poly.G * on_boundary(rng, e) - poly.g).maxCoeff());
    // Each facet must touch the ellipsoid: support function along the facet normal equals its offset.
    const Eigen::MatrixXd& S = e.cov;
    for (Eigen::Index r = 0; r < poly.G.rows(); ++r) {
      const Eigen::VectorXd a = poly.G.row(r).transpose();
      const double support = a.dot(e.mean) + std::sqrt(e.k_delta * std::max(0.0, a.dot(S * a)));
      worst_tight = std::max(worst_tight, std::abs(support - poly.g(r)));
    }
  }
  report(worst_out <= 1e-9 && worst_tight <= 1e-9, "polytope",
         fmt("ellipsoids=100 max_violation=%.3e max_facet_gap=%.3e", worst_out, worst_tight));
}

void gradients() {
  Rng rng(1004);
  const double h = 1e-5;
  double wl = 0.0, ws = 0.0, wn = 0.0, wo = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Instance in = random_instance(rng, true);
    const MvgModel& m = in.model;
    const NllGradients g = nll_gradients(m, in.X, in.Y);
    const KernelParams k = m.kernel();
    auto at = [&](KernelParams kk, const Eigen::MatrixXd& o) { return nll(m.with_hyperparameters(kk, o), in.X, in.Y); };
    auto fd = [&](double KernelParams::*field) {
      KernelParams p = k, q = k;
      p.*field += h;
      q.*field -= h;
      return (at(p, m.omega()) - at(q, m.omega())) / (2 * h);
    };
    wl = std::max(wl, rel_err(g.d_length, fd(&KernelParams::length)));
    ws = std::max(ws, rel_err(g.d_sigma, fd(&KernelParams::sigma)));
    wn = std::max(wn, rel_err(g.d_noise, fd(&KernelParams::noise)));
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        Eigen::MatrixXd op = m.omega(), om = m.omega();
        op(i, j) += h;
        om(i, j) -= h;
        if (i != j) {
          op(j, i) += h;
          om(j, i) -= h;
        }
        const double num = (at(k, op) - at(k, om)) / (2 * h);
        const double an = i == j ? g.d_omega(i, i) : g.d_omega(i, j) + g.d_omega(j, i);
        wo = std::max(wo, rel_err(an, num));
      }
    }
  }
  report(std::max({wl, ws, wn, wo}) < 1e-4, "gradients",
         fmt("instances=20 rel_err length=%.2e sigma=%.2e noise=%.2e omega=%.2e", wl, ws, wn, wo));
}

void chi2() {
  const double q = chi2_quantile(0.95, 8);
  const double oracle = chi2_quantile_quadrature(0.95, 8);
  bool mono = true;
  for (int k = 1; k <= 12; ++k) {
    double prev = 0.0;
    for (double p = 0.01; p < 0.999; p += 0.01) {
      const double x = chi2_quantile(p, k);
      mono = mono && x > prev && std::abs(chi2_cdf(x, k) - p) < 1e-10;
      prev = x;
    }
    if (k > 1) {
      for (double p : {0.5, 0.9, 0.95, 0.99}) mono = mono && chi2_quantile(p, k) > chi2_quantile(p, k - 1);
    }
  }
  for (int k : {2, 4, 8}) {
    double prev = 0.0;
    for (double x = 0.1; x < 40.0; x += 0.1) {
      const double c = chi2_cdf(x, k);
      mono = mono && c >= prev && c <= 1.0;
      prev = c;
    }
  }
  report(std::abs(q - oracle) <= 1e-6 && mono, "chi2",
         fmt("quantile=%.9f oracle=%.9f diff=%.2e monotone=%s", q, oracle, std::abs(q - oracle), mono ? "yes" : "no"));
}

void passthrough(double u_max) {
  Rng rng(1005);
  int unchanged = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Control u_des = in_disc(rng, 0.9 * polygon_inner_radius(u_max, 16));
    std::vector<AgentConstraint> blocks;
    for (int i = 0; i < 1 + rep % 4; ++i) blocks.push_back(certified_block(rng, u_des, uniform(rng, 0.0, 0.5)));
    const QpSolution s = solve(assemble(u_des, blocks, u_max, 16));
    const double d = (s.u - u_des).norm();
    worst = std::max(worst, d);
    if (s.status == QpStatus::optimal && d <= 1e-7) ++unchanged;
  }
  report(unchanged == 100, "minimal_invasiveness", fmt("cases=100 unchanged=%d max_change=%.3e", unchanged, worst));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int trials = 200;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--trials", trials, "paired campaign trials")->check(CLI::PositiveNumber);
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const double u_max = ScenarioConfig{}.u_max;
  try {
    campaign(trials, jobs);
    bound_validity();
    duality(u_max);
    polytope();
    gradients();
    chi2();
    passthrough(u_max);
  } catch (const std::exception& e) {
    std::printf("FAIL  %-22s %s\n", "exception", e.what());
    return 1;
  }
  std::printf("%s (%d failed)\n", failures == 0 ? "ALL PASS" : "SOME FAILED", failures);
  return failures == 0 ? 0 : 1;
}
