#include "rcbf/mvg.hpp"

#include "rcbf/error.hpp"
#include "mvg_detail.hpp"

#include <cmath>
#include <numbers>

namespace rcbf {

double kernel_eval(const KernelParams& k, const Eigen::VectorXd& xi,
                   const Eigen::VectorXd& xj) {
  const double r2 = (xi - xj).squaredNorm();
  return k.sigma * k.sigma * std::exp(-r2 / (2.0 * k.length * k.length));
}

Eigen::MatrixXd gram(const KernelParams& k, const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  const double s2 = k.sigma * k.sigma;
  const double inv = 1.0 / (2.0 * k.length * k.length);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = s2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = s2 * std::exp(-(X.row(i) - X.row(j)).squaredNorm() * inv);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

Eigen::MatrixXd project_spd(const Eigen::MatrixXd& A, double min_eig) {
  const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) {
    throw NumericalError("project_spd: eigendecomposition failed");
  }
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(min_eig);
  const Eigen::MatrixXd& V = es.eigenvectors();
  const Eigen::MatrixXd out = V * lam.asDiagonal() * V.transpose();
  return 0.5 * (out + out.transpose());
}

namespace detail {

Eigen::LLT<Eigen::MatrixXd> factor_kernel(const KernelParams& k,
                                          const Eigen::MatrixXd& X,
                                          double relative_jitter,
                                          double* used_jitter) {
  Eigen::MatrixXd K0 = gram(k, X);
  K0.diagonal().array() += k.noise * k.noise;
  const double s2 = k.sigma * k.sigma;
  double rel = relative_jitter;
  // Repeated or near-repeated inputs make K singular up to rounding; escalate
  // the diagonal load a few decades before giving up.
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd K = K0;
    K.diagonal().array() += rel * s2;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() == Eigen::Success) {
      if (used_jitter) *used_jitter = rel * s2;
      return llt;
    }
    rel = std::max(rel * 10.0, 1e-9);
    if (rel > 1e-4) break;
  }
  throw NumericalError("kernel matrix is not positive definite beyond jitter rescue");
}

Eigen::MatrixXd window_inputs(const std::deque<TrainingSample>& w) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(w.size()), w.front().x.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = w[i].x.transpose();
  }
  return X;
}

Eigen::MatrixXd window_outputs(const std::deque<TrainingSample>& w) {
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(w.size()), w.front().y.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    Y.row(static_cast<Eigen::Index>(i)) = w[i].y.transpose();
  }
  return Y;
}

}  // namespace detail

MvgModel::MvgModel(KernelParams kernel, Eigen::MatrixXd omega,
                   std::size_t capacity, double relative_jitter)
    : kernel_(kernel),
      omega_(std::move(omega)),
      capacity_(capacity),
      relative_jitter_(relative_jitter) {
  if (!(kernel_.sigma > 0.0) || !(kernel_.length > 0.0) ||
      !std::isfinite(kernel_.sigma) || !std::isfinite(kernel_.length)) {
    throw InvalidArgument("MvgModel: sigma and length must be positive");
  }
  if (!(kernel_.noise >= 0.0) || !std::isfinite(kernel_.noise)) {
    throw InvalidArgument("MvgModel: noise must be finite and nonnegative");
  }
  if (omega_.rows() == 0 || omega_.rows() != omega_.cols() || !omega_.allFinite()) {
    throw InvalidArgument("MvgModel: omega must be a finite square matrix");
  }
  if (capacity_ == 0) {
    throw InvalidArgument("MvgModel: capacity must be positive");
  }
  if (!(relative_jitter_ >= 0.0)) {
    throw InvalidArgument("MvgModel: jitter must be nonnegative");
  }
}

MvgModel MvgModel::observe(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  MvgModel out = *this;
  out.observe_inplace(x, y);
  return out;
}

void MvgModel::observe_inplace(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (!x.allFinite() || !y.allFinite()) {
    throw InvalidArgument("MvgModel::observe: non-finite sample");
  }
  if (y.size() != omega_.rows()) {
    throw InvalidArgument("MvgModel::observe: output dimension mismatch");
  }
  if (!window_.empty() && window_.front().x.size() != x.size()) {
    throw InvalidArgument("MvgModel::observe: input dimension mismatch");
  }
  if (window_.size() == capacity_) window_.pop_front();
  window_.push_back({x, y});
}

MvgModel MvgModel::with_hyperparameters(KernelParams kernel,
                                        Eigen::MatrixXd omega) const {
  return MvgModel(kernel, std::move(omega), capacity_, relative_jitter_);
}

DisturbancePosterior MvgModel::posterior(const Eigen::VectorXd& x_star) const {
  if (!x_star.allFinite()) {
    throw InvalidArgument("MvgModel::posterior: non-finite query");
  }
  DisturbancePosterior out;
  const double noise2 = kernel_.noise * kernel_.noise;
  const double prior = kernel_.sigma * kernel_.sigma + noise2;
  if (window_.empty()) {
    out.mean = Eigen::VectorXd::Zero(omega_.rows());
    out.variance = prior;
    out.cov = prior * omega_;
    return out;
  }
  const Eigen::MatrixXd X = detail::window_inputs(window_);
  const Eigen::MatrixXd Y = detail::window_outputs(window_);
  const auto llt = detail::factor_kernel(kernel_, X, relative_jitter_, nullptr);

  Eigen::VectorXd ks(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    ks(i) = kernel_eval(kernel_, X.row(i).transpose(), x_star);
  }
  const Eigen::VectorXd v = llt.matrixL().solve(ks);
  const Eigen::MatrixXd W = llt.matrixL().solve(Y);
  out.mean = (v.transpose() * W).transpose();
  out.variance = std::max(0.0, kernel_.sigma * kernel_.sigma - v.squaredNorm()) + noise2;
  out.cov = out.variance * omega_;
  return out;
}

namespace {

struct NllParts {
  Eigen::LLT<Eigen::MatrixXd> k_llt;
  Eigen::LLT<Eigen::MatrixXd> o_llt;
};

void check_data(const MvgModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  if (X.rows() < 1 || X.rows() != Y.rows()) {
    throw InvalidArgument("nll: X and Y need the same nonzero row count");
  }
  if (Y.cols() != m.output_dim()) {
    throw InvalidArgument("nll: Y column count must match omega");
  }
  if (!X.allFinite() || !Y.allFinite()) {
    throw InvalidArgument("nll: non-finite data");
  }
}

Eigen::LLT<Eigen::MatrixXd> factor_omega(const Eigen::MatrixXd& omega) {
  Eigen::LLT<Eigen::MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("omega is not positive definite");
  }
  return llt;
}

}  // namespace

double nll(const MvgModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  check_data(m, X, Y);
  const auto kl = detail::factor_kernel(m.kernel(), X, m.relative_jitter(), nullptr);
  const auto ol = factor_omega(m.omega());
  const double N = static_cast<double>(X.rows());
  const double n = static_cast<double>(Y.cols());

  const double logdet_k = 2.0 * kl.matrixLLT().diagonal().array().log().sum();
  const double logdet_o = 2.0 * ol.matrixLLT().diagonal().array().log().sum();
  // tr(K^-1 Y O^-1 Y^T) = |L_K^-1 Y L_O^-T|_F^2
  const Eigen::MatrixXd W = kl.matrixL().solve(Y);
  const Eigen::MatrixXd Z = ol.matrixL().solve(W.transpose());
  const double quad = Z.squaredNorm();
  return 0.5 * N * n * std::log(2.0 * std::numbers::pi) + 0.5 * n * logdet_k +
         0.5 * N * logdet_o + 0.5 * quad;
}

NllGradients nll_gradients(const MvgModel& m, const Eigen::MatrixXd& X,
                           const Eigen::MatrixXd& Y) {
  check_data(m, X, Y);
  const KernelParams& kp = m.kernel();
  const auto kl = detail::factor_kernel(kp, X, m.relative_jitter(), nullptr);
  const auto ol = factor_omega(m.omega());
  const Eigen::Index N = X.rows();
  const double n = static_cast<double>(Y.cols());

  const Eigen::MatrixXd Kinv = kl.solve(Eigen::MatrixXd::Identity(N, N));
  const Eigen::MatrixXd Oinv = ol.solve(Eigen::MatrixXd::Identity(Y.cols(), Y.cols()));
  const Eigen::MatrixXd alpha = kl.solve(Y);              // K^-1 Y
  const Eigen::MatrixXd B = alpha * Oinv * alpha.transpose();  // K^-1 Y O^-1 Y^T K^-1
  const Eigen::MatrixXd A = n * Kinv - B;

  // dL/dtheta = 1/2 tr((n K^-1 - B) dK/dtheta)
  const Eigen::MatrixXd R = gram(kp, X);
  const double l = kp.length;
  Eigen::MatrixXd dK_dl(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    dK_dl(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r2 = (X.row(i) - X.row(j)).squaredNorm();
      const double v = R(i, j) * r2 / (l * l * l);
      dK_dl(i, j) = v;
      dK_dl(j, i) = v;
    }
  }
  Eigen::MatrixXd dK_ds = (2.0 / kp.sigma) * R;
  dK_ds.diagonal().array() += 2.0 * kp.sigma * m.relative_jitter();

  NllGradients g;
  g.d_noise = 0.5 * A.trace() * 2.0 * kp.noise;
  g.d_length = 0.5 * A.cwiseProduct(dK_dl).sum();
  g.d_sigma = 0.5 * A.cwiseProduct(dK_ds).sum();
  const Eigen::MatrixXd S = Y.transpose() * alpha;  // Y^T K^-1 Y
  g.d_omega = 0.5 * static_cast<double>(N) * Oinv - 0.5 * Oinv * S * Oinv;
  g.d_omega = 0.5 * (g.d_omega + g.d_omega.transpose()).eval();
  return g;
}

}  // namespace rcbf
