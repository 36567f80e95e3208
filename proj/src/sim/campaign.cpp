#include "rcbf/error.hpp"
#include "rcbf/sim.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace rcbf {

ModeSummary summarize(FilterMode mode, const std::vector<TrialRecord>& records) {
  ModeSummary s;
  s.mode = mode;
  s.trials = static_cast<int>(records.size());
  double sum = 0.0, sq = 0.0;
  int safe = 0;
  long hits2 = 0, hits3 = 0;
  for (const TrialRecord& r : records) {
    s.seeds.push_back(r.seed);
    if (r.collided) {
      ++s.collisions;
    } else {
      ++safe;
      sum += r.distance_to_collision;
      sq += r.distance_to_collision * r.distance_to_collision;
    }
    if (r.reached_goal) ++s.reached_goal;
    s.total_steps += r.steps;
    s.fallback_events += r.fallback_events;
    s.fallback_qp += r.fallback_qp;
    s.fallback_geometry += r.fallback_geometry;
    s.fallback_assumption += r.fallback_assumption;
    s.active_pairs += r.active_pairs;
    s.polytope_outside += r.polytope_outside;
    s.certified_checks += r.certified_checks;
    s.certified_violations += r.certified_violations;
    s.calib_samples += r.calib_samples;
    hits2 += r.calib_hits_2sigma;
    hits3 += r.calib_hits_3sigma;
  }
  if (s.trials > 0) s.collision_rate = static_cast<double>(s.collisions) / s.trials;
  if (safe > 0) {
    s.dtc_mean = sum / safe;
    s.dtc_std = safe > 1 ? std::sqrt(std::max(0.0, (sq - safe * s.dtc_mean * s.dtc_mean) / (safe - 1)))
                         : 0.0;
  }
  if (s.total_steps > 0) s.fallback_rate = static_cast<double>(s.fallback_events) / s.total_steps;
  if (s.active_pairs > 0) {
    s.outside_fraction = static_cast<double>(s.polytope_outside) / s.active_pairs;
  }
  if (s.calib_samples > 0) {
    s.calib_2sigma = static_cast<double>(hits2) / s.calib_samples;
    s.calib_3sigma = static_cast<double>(hits3) / s.calib_samples;
  }
  return s;
}

CampaignResult run_campaign(const ScenarioConfig& cfg, int n_trials,
                            const std::vector<FilterMode>& modes, const ModelBundle* models,
                            int jobs, const TrialOptions& opts) {
  if (n_trials < 1) throw InvalidArgument("run_campaign: n_trials must be >= 1");
  if (modes.empty()) throw InvalidArgument("run_campaign: no modes requested");
  cfg.validate();

  struct Job {
    std::size_t mode_index;
    int trial;
  };
  std::vector<Job> work;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    for (int t = 0; t < n_trials; ++t) work.push_back({m, t});
  }
  std::vector<std::vector<TrialRecord>> out(modes.size(),
                                            std::vector<TrialRecord>(static_cast<std::size_t>(n_trials)));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= work.size()) return;
      const Job& j = work[k];
      try {
        ScenarioConfig c = cfg;
        c.mode = modes[j.mode_index];
        out[j.mode_index][static_cast<std::size_t>(j.trial)] = run_trial(c, models, j.trial, opts);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(work.size());
        return;
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(work.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  CampaignResult res;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    res.summaries[modes[m]] = summarize(modes[m], out[m]);
    res.records[modes[m]] = std::move(out[m]);
  }
  return res;
}

}  // namespace rcbf
