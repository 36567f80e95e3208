#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include <json.hpp>

namespace rcbf {

/// Squared-exponential kernel parameters.
struct KernelParams {
  double sigma = 1.0;   ///< signal scale
  double length = 1.0;  ///< isotropic length scale
  double noise = 0.0;   ///< observation noise std; noise^2 joins the K diagonal
};

/// sigma^2 exp(-|xi - xj|^2 / (2 l^2)).
double kernel_eval(const KernelParams& k, const Eigen::VectorXd& xi,
                   const Eigen::VectorXd& xj);

/// Gram matrix over the rows of X (no jitter).
Eigen::MatrixXd gram(const KernelParams& k, const Eigen::MatrixXd& X);

/// Posterior of the disturbance at one query point. Because the query is a
/// single row, the row covariance collapses to the scalar `variance` and
/// cov = variance * Omega. `variance` is predictive: it includes noise^2.
struct DisturbancePosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double variance = 0.0;
};

struct TrainingSample {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// One disturbance source: kernel, column covariance and a sliding window
/// of recent (state, disturbance) pairs.
class MvgModel {
 public:
  static constexpr std::size_t kDefaultCapacity = 50;
  static constexpr double kDefaultJitter = 1e-8;

  MvgModel() : MvgModel(KernelParams{}, Eigen::Matrix4d::Identity()) {}
  MvgModel(KernelParams kernel, Eigen::MatrixXd omega,
           std::size_t capacity = kDefaultCapacity,
           double relative_jitter = kDefaultJitter);

  const KernelParams& kernel() const { return kernel_; }
  const Eigen::MatrixXd& omega() const { return omega_; }
  std::size_t capacity() const { return capacity_; }
  Eigen::Index output_dim() const { return omega_.rows(); }

  /// Diagonal jitter relative to sigma^2.
  double relative_jitter() const { return relative_jitter_; }
  double jitter() const { return relative_jitter_ * kernel_.sigma * kernel_.sigma; }
  /// Full diagonal load of K: noise^2 plus jitter.
  double diagonal_load() const { return kernel_.noise * kernel_.noise + jitter(); }

  const std::deque<TrainingSample>& window() const { return window_; }

  /// Copy with the pair appended, evicting the oldest entry when full.
  MvgModel observe(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  void observe_inplace(const Eigen::VectorXd& x, const Eigen::VectorXd& y);
  void clear_window() { window_.clear(); }

  /// Copy carrying new hyperparameters and an empty window.
  MvgModel with_hyperparameters(KernelParams kernel, Eigen::MatrixXd omega) const;

  DisturbancePosterior posterior(const Eigen::VectorXd& x_star) const;

 private:
  KernelParams kernel_;
  Eigen::MatrixXd omega_;
  std::size_t capacity_;
  double relative_jitter_;
  std::deque<TrainingSample> window_;
};

/// Negative log-likelihood of the matrix-variate model for rows X -> Y,
///   (Nn/2) ln 2pi + (n/2) ln|K| + (N/2) ln|Omega| + 1/2 tr(K^-1 Y Omega^-1 Y^T)
/// with K = gram + (noise^2 + jitter) I.
double nll(const MvgModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

struct NllGradients {
  double d_length = 0.0;
  double d_sigma = 0.0;
  double d_noise = 0.0;
  Eigen::MatrixXd d_omega;
};

NllGradients nll_gradients(const MvgModel& m, const Eigen::MatrixXd& X,
                           const Eigen::MatrixXd& Y);

struct Batch {
  Eigen::MatrixXd X;  ///< N x d inputs
  Eigen::MatrixXd Y;  ///< N x n outputs
};

struct TrainConfig {
  double learning_rate = 1e-2;
  int steps = 2000;
  int restarts = 5;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 1;
  int record_every = 50;  ///< NLL-curve sampling period, in steps
  bool learn_noise = true;  ///< false keeps noise at zero (interpolating model)
};

struct RestartResult {
  int index = 0;
  KernelParams initial;
  KernelParams final;
  double initial_train_nll = 0.0;  ///< per sample
  double final_train_nll = 0.0;    ///< per sample
  double holdout_nll = 0.0;        ///< per sample
  bool diverged = false;
  std::vector<double> curve;       ///< per-sample train NLL every record_every steps
};

struct TrainReport {
  std::vector<RestartResult> restarts;
  int best = -1;
  std::size_t train_batches = 0;
  std::size_t holdout_batches = 0;
};

/// Stochastic gradient training with random restarts; returns the model
/// whose hyperparameters give the lowest held-out NLL. Omega is projected
/// back to symmetric with eigenvalues >= 1e-6 after every step.
MvgModel train(const MvgModel& m, const std::vector<Batch>& dataset,
               const TrainConfig& cfg, TrainReport* report = nullptr);

/// Mean per-sample NLL over a set of batches.
double mean_nll(const MvgModel& m, const std::vector<Batch>& batches);

/// Symmetrize and clamp eigenvalues from below.
Eigen::MatrixXd project_spd(const Eigen::MatrixXd& A, double min_eig);

// Serialization. The document carries a format version and full-precision
// hyperparameters and window contents.
nlohmann::json to_json(const MvgModel& m);
MvgModel mvg_from_json(const nlohmann::json& j);

}  // namespace rcbf
