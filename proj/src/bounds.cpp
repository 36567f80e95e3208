#include "rcbf/bounds.hpp"

#include "rcbf/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <numeric>

namespace rcbf {

double chi2_quantile(double prob, int dof) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw InvalidArgument("chi2_quantile: prob must lie in (0, 1)");
  }
  if (dof < 1) throw InvalidArgument("chi2_quantile: dof must be positive");
  return 2.0 * boost::math::gamma_p_inv(0.5 * dof, prob);
}

double chi2_cdf(double x, int dof) {
  if (dof < 1) throw InvalidArgument("chi2_cdf: dof must be positive");
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

double sigma_level_threshold(double n_sigma, int dof) {
  if (!(n_sigma > 0.0)) throw InvalidArgument("sigma_level_threshold: n must be positive");
  return chi2_quantile(std::erf(n_sigma / std::sqrt(2.0)), dof);
}

namespace {

std::vector<Eigen::Index> normalize_blocks(std::vector<Eigen::Index> blocks, Eigen::Index P) {
  if (blocks.empty()) return {P};
  const Eigen::Index total = std::accumulate(blocks.begin(), blocks.end(), Eigen::Index{0});
  if (total != P) throw InvalidArgument("ellipsoid: block sizes do not sum to dimension");
  for (Eigen::Index b : blocks) {
    if (b <= 0) throw InvalidArgument("ellipsoid: empty block");
  }
  return blocks;
}

}  // namespace

ConfidenceEllipsoid make_ellipsoid(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                   double k_delta, std::vector<Eigen::Index> blocks) {
  const Eigen::Index P = mean.size();
  if (cov.rows() != P || cov.cols() != P) {
    throw InvalidArgument("ellipsoid: covariance shape does not match mean");
  }
  if (!mean.allFinite() || !cov.allFinite() || !(k_delta >= 0.0)) {
    throw InvalidArgument("ellipsoid: non-finite input");
  }
  ConfidenceEllipsoid e;
  e.mean = mean;
  e.k_delta = k_delta;
  e.blocks = normalize_blocks(std::move(blocks), P);

  Eigen::MatrixXd S = 0.5 * (cov + cov.transpose());
  e.repaired = (S - cov).cwiseAbs().maxCoeff() > 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.eigenvalues().minCoeff() < 0.0) {
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    S = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    S = 0.5 * (S + S.transpose()).eval();
    e.repaired = true;
  }
  e.cov = S;
  return e;
}

ConfidenceEllipsoid build_ellipsoid(const DisturbancePosterior& robot,
                                    const DisturbancePosterior& agent, double delta) {
  if (robot.mean.size() != 4 || agent.mean.size() != 4 || robot.cov.rows() != 4 ||
      agent.cov.rows() != 4) {
    throw InvalidArgument("build_ellipsoid: posteriors must be 4-dimensional");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("build_ellipsoid: delta must lie in (0, 1)");
  }
  Eigen::VectorXd mean(8);
  mean << robot.mean, agent.mean;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(8, 8);
  cov.topLeftCorner<4, 4>() = robot.cov;
  cov.bottomRightCorner<4, 4>() = agent.cov;
  ConfidenceEllipsoid e = make_ellipsoid(mean, cov, chi2_quantile(1.0 - delta, 8), {4, 4});
  e.delta = delta;
  return e;
}

bool UncertaintyPolytope::contains(const Eigen::VectorXd& d, double tol) const {
  return ((G * d - g).array() <= tol).all();
}

UncertaintyPolytope to_polytope(const ConfidenceEllipsoid& e) {
  const Eigen::Index P = e.mean.size();
  UncertaintyPolytope poly;
  poly.blocks = normalize_blocks(e.blocks, P);
  poly.axes = Eigen::MatrixXd::Zero(P, P);
  poly.radius.resize(P);
  poly.center = e.mean;

  Eigen::Index off = 0;
  for (Eigen::Index b : poly.blocks) {
    const Eigen::MatrixXd blk = e.cov.block(off, off, b, b);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (blk + blk.transpose()));
    if (es.info() != Eigen::Success) {
      throw NumericalError("to_polytope: eigendecomposition failed");
    }
    poly.axes.block(off, off, b, b) = es.eigenvectors();
    poly.radius.segment(off, b) =
        (e.k_delta * es.eigenvalues().cwiseMax(0.0).array()).sqrt().matrix();
    off += b;
  }

  poly.G.resize(2 * P, P);
  poly.g.resize(2 * P);
  for (Eigen::Index i = 0; i < P; ++i) {
    const Eigen::VectorXd u = poly.axes.col(i);
    const double c = u.dot(e.mean);
    poly.G.row(2 * i) = u.transpose();
    poly.G.row(2 * i + 1) = -u.transpose();
    poly.g(2 * i) = poly.radius(i) + c;
    poly.g(2 * i + 1) = poly.radius(i) - c;
  }
  return poly;
}

UncertaintyPolytope zero_polytope(Eigen::Index P, std::vector<Eigen::Index> blocks) {
  return to_polytope(make_ellipsoid(Eigen::VectorXd::Zero(P), Eigen::MatrixXd::Zero(P, P),
                                    0.0, std::move(blocks)));
}

ZetaBounds zeta_from_polytope(const ConfidenceEllipsoid& e) {
  if (e.mean.size() != 4) {
    throw InvalidArgument("zeta_from_polytope: expects a 4-dimensional source");
  }
  auto cap = [&](Eigen::Index off) {
    const Eigen::Matrix2d S = e.cov.block<2, 2>(off, off);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (S + S.transpose()));
    const double lmax = std::max(0.0, es.eigenvalues().maxCoeff());
    return e.mean.segment<2>(off).norm() + std::sqrt(e.k_delta * lmax);
  };
  return {cap(0), cap(2)};
}

std::vector<ZetaBounds> zeta_from_box(const UncertaintyPolytope& poly) {
  std::vector<ZetaBounds> out;
  Eigen::Index off = 0;
  for (Eigen::Index b : poly.blocks) {
    if (b != 4) throw InvalidArgument("zeta_from_box: blocks must be 4-dimensional");
    const Eigen::Vector4d c = poly.center.segment<4>(off);
    const Eigen::Matrix4d A = poly.axes.block<4, 4>(off, off);
    const Eigen::Vector4d r = poly.radius.segment<4>(off);
    ZetaBounds z;
    // |.| is convex, so its maximum over the box sits at a vertex.
    for (int mask = 0; mask < 16; ++mask) {
      Eigen::Vector4d s;
      for (int i = 0; i < 4; ++i) s(i) = (mask >> i & 1) ? r(i) : -r(i);
      const Eigen::Vector4d v = c + A * s;
      z.zeta_p = std::max(z.zeta_p, v.head<2>().norm());
      z.zeta_v = std::max(z.zeta_v, v.tail<2>().norm());
    }
    out.push_back(z);
    off += b;
  }
  return out;
}

namespace {

constexpr double kRelZeroVariance = 1e-14;

}  // namespace

double mahalanobis_sq(const Eigen::VectorXd& d, const Eigen::VectorXd& mean,
                      const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
  const Eigen::VectorXd proj = es.eigenvectors().transpose() * (d - mean);
  const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
  double q = 0.0;
  for (Eigen::Index i = 0; i < proj.size(); ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam <= kRelZeroVariance * lmax || lam <= 0.0) {
      if (std::abs(proj(i)) > 1e-12) return std::numeric_limits<double>::infinity();
      continue;
    }
    q += proj(i) * proj(i) / lam;
  }
  return q;
}

Eigen::VectorXd whiten(const Eigen::VectorXd& d, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
  Eigen::VectorXd w = es.eigenvectors().transpose() * (d - mean);
  const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double lam = es.eigenvalues()(i);
    w(i) = (lam <= kRelZeroVariance * lmax || lam <= 0.0) ? 0.0 : w(i) / std::sqrt(lam);
  }
  return w;
}

}  // namespace rcbf
