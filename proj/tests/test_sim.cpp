#include "support.hpp"

#include "rcbf/error.hpp"
#include "rcbf/rng.hpp"
#include "rcbf/sim.hpp"

#include <doctest.h>

#include <set>

using namespace rcbf;
using namespace rcbf::test;

namespace {

ScenarioConfig short_config() {
  ScenarioConfig c;
  c.horizon = 120;
  c.seed = 5;
  return c;
}

AgentSpec blind_spec(const Eigen::Vector2d& goal, double v_max) {
  AgentSpec s;
  s.blind = true;
  s.goal = goal;
  s.v_max = v_max;
  return s;
}

/// Three agents walking away from the robot's lane, far outside activation range.
World far_world() {
  World w;
  w.robot = AgentState({-4.0, -9.0}, {0.0, 0.0});
  w.robot_goal = Eigen::Vector2d(4.0, -9.0);
  for (double x : {-6.0, 0.0, 6.0}) {
    w.agents.push_back(AgentState({x, 9.0}, {0.0, 0.5}));
    w.specs.push_back(blind_spec(Eigen::Vector2d(x, 200.0), 1.0));
  }
  return w;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("blind count rounds half up") {
  CHECK(blind_count(3, 0.5) == 2);
  CHECK(blind_count(4, 0.5) == 2);
  CHECK(blind_count(12, 0.5) == 6);
  CHECK(blind_count(5, 0.0) == 0);
  CHECK(blind_count(5, 1.0) == 5);
}

TEST_CASE("spawned scenes are deterministic and respect the separation and count rules") {
  const ScenarioConfig cfg = short_config();
  std::set<std::size_t> counts;
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t s = trial_seed(cfg.seed, i);
    const World a = spawn_scenario(cfg, s);
    const World b = spawn_scenario(cfg, s);
    REQUIRE(a.agents.size() == b.agents.size());
    CHECK(a.robot.p == b.robot.p);
    for (std::size_t k = 0; k < a.agents.size(); ++k) CHECK(a.agents[k].p == b.agents[k].p);

    const std::size_t n = a.agents.size();
    counts.insert(n);
    CHECK(n >= 3);
    CHECK(n <= 12);
    CHECK(a.specs.size() == n);
    int blind = 0;
    for (const AgentSpec& sp : a.specs) blind += sp.blind ? 1 : 0;
    CHECK(blind == blind_count(static_cast<int>(n), cfg.blind_fraction));

    std::vector<Eigen::Vector2d> pts{a.robot.p};
    for (const AgentState& x : a.agents) pts.push_back(x.p);
    for (std::size_t p = 0; p < pts.size(); ++p) {
      CHECK(pts[p].cwiseAbs().maxCoeff() <= cfg.arena);
      for (std::size_t q = p + 1; q < pts.size(); ++q) CHECK((pts[p] - pts[q]).norm() >= 2.0 * cfg.barrier.d_s);
    }
    CHECK((a.robot_goal - a.robot.p).norm() >= cfg.min_goal_distance);
  }
  CHECK(counts.size() > 5);
}

TEST_CASE("trial seeds are shared across modes and distinct across trials") {
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(trial_seed(9, i));
  CHECK(seen.size() == 1000);
  ScenarioConfig c = short_config();
  c.horizon = 3;
  c.mode = FilterMode::none;
  const TrialRecord a = run_trial(c, nullptr, 4);
  c.mode = FilterMode::nominal;
  const TrialRecord b = run_trial(c, nullptr, 4);
  CHECK(a.seed == b.seed);
  CHECK(a.n_agents == b.n_agents);
}

TEST_CASE("unfiltered head-on approach collides") {
  ScenarioConfig c = short_config();
  c.mode = FilterMode::none;
  c.robot_noise = 0.0;
  c.agent_noise = 0.0;
  World w = far_world();
  w.robot = AgentState({-3.0, 0.0}, {0.0, 0.0});
  w.robot_goal = Eigen::Vector2d(3.0, 0.0);
  w.agents[1] = AgentState({3.0, 0.0}, {0.0, 0.0});
  w.specs[1] = blind_spec(Eigen::Vector2d(-3.0, 0.0), 1.2);
  TrialOptions opts;
  opts.initial_world = w;
  const TrialRecord r = run_trial(c, nullptr, 0, opts);
  CHECK(r.collided);
  CHECK(r.min_separation < c.barrier.d_s);
  CHECK(r.qp_solves == 0);
}

TEST_CASE("filters are inert when every agent stays outside the activation radius") {
  ScenarioConfig c = short_config();
  TrialOptions opts;
  opts.initial_world = far_world();
  opts.keep_trajectory = true;
  const ModelBundle models;
  c.mode = FilterMode::none;
  const TrialRecord none = run_trial(c, nullptr, 2, opts);
  c.mode = FilterMode::robust;
  const TrialRecord robust = run_trial(c, &models, 2, opts);
  c.mode = FilterMode::nominal;
  const TrialRecord nominal = run_trial(c, nullptr, 2, opts);
  CHECK(robust.qp_solves == 0);
  CHECK(nominal.qp_solves == 0);
  CHECK(none.reached_goal);
  REQUIRE(none.trajectory.size() == robust.trajectory.size());
  REQUIRE(none.trajectory.size() == nominal.trajectory.size());
  for (std::size_t k = 0; k < none.trajectory.size(); ++k) {
    CHECK(none.trajectory[k].p == robust.trajectory[k].p);
    CHECK(none.trajectory[k].p == nominal.trajectory[k].p);
  }
  CHECK(robust.calib_samples == robust.steps * 3);
}

TEST_CASE("scripted worlds must pair each agent with a spec") {
  World w = far_world();
  w.specs.pop_back();
  TrialOptions opts;
  opts.initial_world = w;
  ScenarioConfig c = short_config();
  c.mode = FilterMode::none;
  CHECK_THROWS_AS(run_trial(c, nullptr, 0, opts), InvalidArgument);
}

TEST_CASE("robust mode without models is rejected") {
  ScenarioConfig c = short_config();
  c.mode = FilterMode::robust;
  CHECK_THROWS_AS(run_trial(c, nullptr, 0), InvalidArgument);
}

TEST_CASE("trial records are deterministic and round-trip through json") {
  ScenarioConfig c = short_config();
  c.mode = FilterMode::robust;
  const ModelBundle models;
  const TrialRecord a = run_trial(c, &models, 1);
  const TrialRecord b = run_trial(c, &models, 1);
  CHECK(to_json(a) == to_json(b));
  const TrialRecord r = record_from_json(to_json(a));
  CHECK(to_json(r) == to_json(a));
  CHECK(a.calib_samples == static_cast<int>(a.calibration.size()));
  CHECK(a.calib_hits_3sigma >= a.calib_hits_2sigma);
  CHECK(a.polytope_outside <= a.active_pairs);
  CHECK(a.certified_checks <= a.active_pairs);
  CHECK(a.fallback_events == a.fallback_qp + a.fallback_geometry + a.fallback_assumption);
}

TEST_CASE("a single-trial campaign summary counts one trial per mode") {
  ScenarioConfig c = short_config();
  const CampaignResult res = run_campaign(c, 1, {FilterMode::nominal, FilterMode::none}, nullptr);
  for (FilterMode m : {FilterMode::nominal, FilterMode::none}) {
    const ModeSummary& s = res.summaries.at(m);
    CHECK(s.trials == 1);
    CHECK(s.seeds.size() == 1);
    CHECK(s.collision_rate == static_cast<double>(s.collisions));
  }
  CHECK(res.summaries.at(FilterMode::nominal).seeds == res.summaries.at(FilterMode::none).seeds);
}

TEST_CASE("summary rates are counts over trials") {
  std::vector<TrialRecord> recs(7);
  for (int i = 0; i < 7; ++i) {
    recs[i].trial = i;
    recs[i].collided = i % 3 == 0;
    recs[i].distance_to_collision = i;
    recs[i].steps = 10;
    recs[i].fallback_events = i;
    recs[i].active_pairs = 4;
    recs[i].polytope_outside = 1;
  }
  const ModeSummary s = summarize(FilterMode::robust, recs);
  CHECK(s.collisions == 3);
  CHECK(s.collision_rate == doctest::Approx(3.0 / 7.0));
  CHECK(s.dtc_mean == doctest::Approx(3.0));
  CHECK(s.fallback_rate == doctest::Approx(21.0 / 70.0));
  CHECK(s.outside_fraction == doctest::Approx(0.25));
}

TEST_CASE("parallel campaigns match the serial run") {
  ScenarioConfig c = short_config();
  c.horizon = 60;
  const CampaignResult a = run_campaign(c, 4, {FilterMode::nominal}, nullptr, 1);
  const CampaignResult b = run_campaign(c, 4, {FilterMode::nominal}, nullptr, 3);
  for (int i = 0; i < 4; ++i) {
    CHECK(to_json(a.records.at(FilterMode::nominal)[i]) == to_json(b.records.at(FilterMode::nominal)[i]));
  }
}

TEST_CASE("noise-free blind agents produce kinematically consistent residuals") {
  ScenarioConfig c = short_config();
  c.agent_noise = 0.0;
  c.blind_fraction = 1.0;
  const int episodes = 3, steps = 40;
  const TrainingData d = collect_training_data(c, episodes, steps, 16, 3);
  std::size_t agents = 0;
  for (int e = 0; e < episodes; ++e) agents += spawn_scenario(c, derive_seed(3, e)).agents.size();
  CHECK(d.robot_rows == static_cast<std::size_t>(episodes * steps));
  CHECK(d.agent_rows == agents * steps);
  for (const Batch& b : d.agent) {
    CHECK(b.Y.rows() <= 16);
    for (Eigen::Index r = 0; r < b.Y.rows(); ++r) {
      const Eigen::Vector2d dp = b.Y.row(r).head<2>().transpose();
      const Eigen::Vector2d dv = b.Y.row(r).tail<2>().transpose();
      CHECK((dp - c.dt * dv).norm() < 1e-12);
      CHECK(dv.norm() <= c.dt * c.agent_a_lim + 1e-12);
    }
  }
}

TEST_CASE("training data round-trips through json") {
  const TrainingData d = collect_training_data(short_config(), 1, 20, 8, 4);
  const TrainingData r = training_data_from_json(to_json(d));
  REQUIRE(r.agent.size() == d.agent.size());
  CHECK(r.agent_rows == d.agent_rows);
  CHECK(r.robot_rows == d.robot_rows);
  for (std::size_t k = 0; k < d.agent.size(); ++k) CHECK((r.agent[k].Y - d.agent[k].Y).norm() == 0.0);
}

TEST_CASE("trained agent model beats the untrained prior on held-out episodes") {
  const ScenarioConfig c = short_config();
  const TrainingData train_set = collect_training_data(c, 4, 100, 25, 21);
  const TrainingData held_out = collect_training_data(c, 2, 100, 25, 22);
  const MvgModel init(KernelParams{}, Eigen::Matrix4d::Identity());
  TrainConfig tc;
  tc.steps = 150;
  tc.restarts = 1;
  const MvgModel m = train(init, train_set.agent, tc);
  CHECK(mean_nll(m, held_out.agent) < mean_nll(init, held_out.agent));
}

TEST_CASE("config json round-trip and validation") {
  ScenarioConfig c;
  c.u_max = 7.5;
  c.mode = FilterMode::nominal;
  const ScenarioConfig r = scenario_from_json(to_json(c));
  CHECK(to_json(r) == to_json(c));
  CHECK_THROWS_AS(scenario_from_json({{"n_agents_max", 20}}), InvalidArgument);
  CHECK_THROWS_AS(scenario_from_json({{"delta", 1.5}}), InvalidArgument);
  CHECK_THROWS_AS(filter_mode_from_string("fast"), InvalidArgument);
}

}  // TEST_SUITE
