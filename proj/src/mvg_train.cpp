#include "rcbf/mvg.hpp"

#include "rcbf/error.hpp"
#include "rcbf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace rcbf {

namespace {

constexpr double kOmegaFloor = 1e-6;
constexpr double kLogBound = 15.0;
constexpr double kRankTolerance = 1e-12;
// Largest log-space move per step; one unlucky batch cannot fling a restart away.
constexpr double kMaxLogStep = 0.5;

double clipped(double step) { return std::clamp(step, -kMaxLogStep, kMaxLogStep); }

double median_pairwise_distance(const Eigen::MatrixXd& X) {
  std::vector<double> d;
  const Eigen::Index n = std::min<Eigen::Index>(X.rows(), 60);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      d.push_back((X.row(i) - X.row(j)).norm());
    }
  }
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
  const double med = d[d.size() / 2];
  return med > 1e-9 ? med : 1.0;
}

Eigen::VectorXd column_variance(const std::vector<Batch>& batches,
                                const std::vector<std::size_t>& idx) {
  const Eigen::Index n = batches[idx.front()].Y.cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(n);
  double count = 0.0;
  for (std::size_t b : idx) {
    sum += batches[b].Y.colwise().sum().transpose();
    sq += batches[b].Y.colwise().squaredNorm().transpose();
    count += static_cast<double>(batches[b].Y.rows());
  }
  const Eigen::VectorXd mean = sum / count;
  return (sq / count - mean.cwiseAbs2()).cwiseMax(0.0);
}

// Orthonormal basis of the output directions that carry variance in the
// training rows. Directions with no variance at all (outputs that are exact
// linear functions of others) make the likelihood unbounded, so training
// runs in the span of the rest.
Eigen::MatrixXd informative_basis(const std::vector<Batch>& batches,
                                  const std::vector<std::size_t>& idx) {
  const Eigen::Index n = batches[idx.front()].Y.cols();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t b : idx) M += batches[b].Y.transpose() * batches[b].Y;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  const double top = es.eigenvalues().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (es.eigenvalues()(i) > kRankTolerance * top) keep.push_back(i);
  }
  if (keep.empty() || !(top > 0.0)) return Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd U(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    U.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]);
  }
  return U;
}

double mean_nll_subset(const MvgModel& m, const std::vector<Batch>& batches,
                       const std::vector<std::size_t>& idx) {
  double total = 0.0;
  double count = 0.0;
  for (std::size_t b : idx) {
    total += nll(m, batches[b].X, batches[b].Y);
    count += static_cast<double>(batches[b].X.rows());
  }
  return total / count;
}

}  // namespace

double mean_nll(const MvgModel& m, const std::vector<Batch>& batches) {
  if (batches.empty()) throw InvalidArgument("mean_nll: no batches");
  std::vector<std::size_t> idx(batches.size());
  std::iota(idx.begin(), idx.end(), 0);
  return mean_nll_subset(m, batches, idx);
}

MvgModel train(const MvgModel& m, const std::vector<Batch>& dataset,
               const TrainConfig& cfg, TrainReport* report) {
  if (dataset.empty()) throw InvalidArgument("train: dataset is empty");
  if (cfg.restarts < 1 || cfg.steps < 0 || !(cfg.learning_rate > 0.0)) {
    throw InvalidArgument("train: invalid configuration");
  }
  for (const Batch& b : dataset) {
    if (b.X.rows() < 1 || b.X.rows() != b.Y.rows() || b.Y.cols() != m.output_dim()) {
      throw InvalidArgument("train: malformed batch");
    }
  }

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(derive_seed(cfg.seed, 0x5eed5b1171ULL));
  std::shuffle(order.begin(), order.end(), split_rng);

  std::vector<std::size_t> train_idx, hold_idx;
  if (dataset.size() < 2) {
    train_idx = order;
    hold_idx = order;
  } else {
    auto n_hold = static_cast<std::size_t>(
        std::floor(cfg.holdout_fraction * static_cast<double>(dataset.size())));
    n_hold = std::clamp<std::size_t>(n_hold, 1, dataset.size() - 1);
    hold_idx.assign(order.begin(), order.begin() + static_cast<long>(n_hold));
    train_idx.assign(order.begin() + static_cast<long>(n_hold), order.end());
  }

  const Eigen::MatrixXd U = informative_basis(dataset, train_idx);
  std::vector<Batch> proj;
  proj.reserve(dataset.size());
  for (const Batch& b : dataset) proj.push_back({b.X, b.Y * U});
  const MvgModel reduced(m.kernel(), Eigen::MatrixXd::Identity(U.cols(), U.cols()), m.capacity(),
                         m.relative_jitter());
  const Eigen::VectorXd var = column_variance(proj, train_idx);
  const double l0 = median_pairwise_distance(dataset[train_idx.front()].X);

  TrainReport local;
  local.train_batches = train_idx.size();
  local.holdout_batches = dataset.size() < 2 ? 0 : hold_idx.size();

  double best_hold = std::numeric_limits<double>::infinity();
  MvgModel best = reduced;

  for (int r = 0; r < cfg.restarts; ++r) {
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r) + 1));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double log_s = std::log(0.5) + unit(rng) * std::log(4.0);
    double log_l = std::log(l0) + std::log(0.2) + unit(rng) * std::log(25.0);
    // Noise starts between 0.1 and 1 times sigma.
    double log_n = log_s + std::log(0.1) + unit(rng) * std::log(10.0);
    auto noise = [&] { return cfg.learn_noise ? std::exp(log_n) : 0.0; };
    Eigen::MatrixXd omega = var.cwiseMax(kOmegaFloor).asDiagonal();
    omega /= std::exp(2.0 * log_s) + noise() * noise();
    omega = project_spd(omega, kOmegaFloor);

    RestartResult res;
    res.index = r;
    res.initial = {std::exp(log_s), std::exp(log_l), noise()};

    auto current = [&] {
      return reduced.with_hyperparameters({std::exp(log_s), std::exp(log_l), noise()}, omega);
    };

    try {
      res.initial_train_nll = mean_nll_subset(current(), proj, train_idx);
      res.curve.push_back(res.initial_train_nll);
      std::uniform_int_distribution<std::size_t> pick(0, train_idx.size() - 1);
      for (int step = 1; step <= cfg.steps; ++step) {
        const Batch& b = proj[train_idx[pick(rng)]];
        const MvgModel cur = current();
        const NllGradients g = nll_gradients(cur, b.X, b.Y);
        const double N = static_cast<double>(b.X.rows());
        const double lr = cfg.learning_rate;

        log_s -= clipped(lr * std::exp(log_s) * g.d_sigma / N);
        log_l -= clipped(lr * std::exp(log_l) * g.d_length / N);
        if (cfg.learn_noise) log_n -= clipped(lr * std::exp(log_n) * g.d_noise / N);
        // Preconditioned by Omega (.) Omega: the step moves Omega toward the
        // batch estimate Y^T K^-1 Y / N instead of scaling with Omega^-1.
        omega -= lr * (2.0 / N) * (omega * g.d_omega * omega);
        omega = project_spd(omega, kOmegaFloor);

        if (!std::isfinite(log_s) || !std::isfinite(log_l) || !omega.allFinite() ||
            std::abs(log_s) > kLogBound || std::abs(log_l) > kLogBound ||
            (cfg.learn_noise && std::abs(log_n) > kLogBound)) {
          throw NumericalError("train: parameters left the admissible range");
        }
        if (cfg.record_every > 0 && step % cfg.record_every == 0) {
          res.curve.push_back(mean_nll_subset(current(), proj, train_idx));
        }
      }
      const MvgModel fin = current();
      res.final = fin.kernel();
      res.final_train_nll = mean_nll_subset(fin, proj, train_idx);
      res.holdout_nll = mean_nll_subset(fin, proj, hold_idx);
      if (!std::isfinite(res.final_train_nll) || !std::isfinite(res.holdout_nll)) {
        res.diverged = true;
      } else if (res.holdout_nll < best_hold) {
        best_hold = res.holdout_nll;
        best = fin;
        local.best = r;
      }
    } catch (const NumericalError&) {
      res.diverged = true;
      res.final = {std::exp(log_s), std::exp(log_l), noise()};
      res.final_train_nll = std::numeric_limits<double>::quiet_NaN();
      res.holdout_nll = std::numeric_limits<double>::quiet_NaN();
    }
    local.restarts.push_back(std::move(res));
  }

  if (report) *report = local;
  if (local.best < 0) {
    throw NumericalError("train: every restart diverged");
  }
  // Back to the full output space; directions without variance get the floor.
  const Eigen::Index n = U.rows();
  const Eigen::MatrixXd P = U * U.transpose();
  const Eigen::MatrixXd full = U * best.omega() * U.transpose() +
                               kOmegaFloor * (Eigen::MatrixXd::Identity(n, n) - P);
  return m.with_hyperparameters(best.kernel(), project_spd(full, kOmegaFloor));
}

}  // namespace rcbf
