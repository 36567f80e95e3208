#include "rcbf/error.hpp"
#include "rcbf/sim.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace rcbf {

namespace {

constexpr int kRecordVersion = 1;

// Calibration arrays are large; 7 significant digits keep lines short.
double compact(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.7g", v);
  return std::strtod(buf, nullptr);
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(compact(v)) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const TrialRecord& r) {
  nlohmann::json q = nlohmann::json::array();
  nlohmann::json wv = nlohmann::json::array();
  for (const CalibrationSample& s : r.calibration) {
    q.push_back(number_or_null(s.q));
    wv.push_back({compact(s.wv(0)), compact(s.wv(1))});
  }
  return {{"format_version", kRecordVersion},
          {"trial", r.trial},
          {"seed", r.seed},
          {"mode", to_string(r.mode)},
          {"n_agents", r.n_agents},
          {"collided", r.collided},
          {"reached_goal", r.reached_goal},
          {"min_separation", r.min_separation},
          {"distance_to_collision", r.distance_to_collision},
          {"steps", r.steps},
          {"fallback_events", r.fallback_events},
          {"fallback_qp", r.fallback_qp},
          {"fallback_geometry", r.fallback_geometry},
          {"fallback_assumption", r.fallback_assumption},
          {"qp_solves", r.qp_solves},
          {"qp_nonoptimal", r.qp_nonoptimal},
          {"active_pairs", r.active_pairs},
          {"polytope_outside", r.polytope_outside},
          {"certified_checks", r.certified_checks},
          {"certified_violations", r.certified_violations},
          {"worst_certified_margin", r.worst_certified_margin},
          {"calibration",
           {{"samples", r.calib_samples},
            {"hits_2sigma", r.calib_hits_2sigma},
            {"hits_3sigma", r.calib_hits_3sigma},
            {"q", std::move(q)},
            {"whitened_v", std::move(wv)}}}};
}

TrialRecord record_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kRecordVersion) {
      throw InvalidArgument("unsupported record format_version");
    }
    TrialRecord r;
    r.trial = j.at("trial").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mode = filter_mode_from_string(j.at("mode").get<std::string>());
    r.n_agents = j.at("n_agents").get<int>();
    r.collided = j.at("collided").get<bool>();
    r.reached_goal = j.at("reached_goal").get<bool>();
    r.min_separation = j.at("min_separation").get<double>();
    r.distance_to_collision = j.at("distance_to_collision").get<double>();
    r.steps = j.at("steps").get<int>();
    r.fallback_events = j.at("fallback_events").get<int>();
    r.fallback_qp = j.value("fallback_qp", 0);
    r.fallback_geometry = j.value("fallback_geometry", 0);
    r.fallback_assumption = j.value("fallback_assumption", 0);
    r.qp_solves = j.value("qp_solves", 0);
    r.qp_nonoptimal = j.value("qp_nonoptimal", 0);
    r.active_pairs = j.value("active_pairs", 0);
    r.polytope_outside = j.value("polytope_outside", 0);
    r.certified_checks = j.value("certified_checks", 0);
    r.certified_violations = j.value("certified_violations", 0);
    r.worst_certified_margin = j.value("worst_certified_margin", 0.0);
    const auto& c = j.at("calibration");
    r.calib_samples = c.at("samples").get<int>();
    r.calib_hits_2sigma = c.at("hits_2sigma").get<int>();
    r.calib_hits_3sigma = c.at("hits_3sigma").get<int>();
    const auto& q = c.at("q");
    const auto& wv = c.at("whitened_v");
    if (q.size() != wv.size()) throw InvalidArgument("record calibration arrays differ in length");
    for (std::size_t i = 0; i < q.size(); ++i) {
      CalibrationSample s;
      s.q = q[i].is_null() ? std::numeric_limits<double>::infinity() : q[i].get<double>();
      s.wv = Eigen::Vector2d(wv[i].at(0).get<double>(), wv[i].at(1).get<double>());
      r.calibration.push_back(s);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed trial record: ") + e.what());
  }
}

nlohmann::json to_json(const ModeSummary& s) {
  return {{"format_version", 1},
          {"mode", to_string(s.mode)},
          {"trials", s.trials},
          {"collisions", s.collisions},
          {"collision_rate", s.collision_rate},
          {"distance_to_collision_mean", s.dtc_mean},
          {"distance_to_collision_std", s.dtc_std},
          {"reached_goal", s.reached_goal},
          {"total_steps", s.total_steps},
          {"fallback_events", s.fallback_events},
          {"fallback_qp", s.fallback_qp},
          {"fallback_geometry", s.fallback_geometry},
          {"fallback_assumption", s.fallback_assumption},
          {"fallback_rate", s.fallback_rate},
          {"active_pairs", s.active_pairs},
          {"polytope_outside", s.polytope_outside},
          {"outside_fraction", s.outside_fraction},
          {"certified_checks", s.certified_checks},
          {"certified_violations", s.certified_violations},
          {"calibration_samples", s.calib_samples},
          {"calibration_2sigma", s.calib_2sigma},
          {"calibration_3sigma", s.calib_3sigma},
          {"seeds", s.seeds}};
}

}  // namespace rcbf
