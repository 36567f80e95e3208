#pragma once

// Shared generators and independent reference computations for the tests.
// Nothing here calls into the library code paths it is used to check.

#include "rcbf/bounds.hpp"
#include "rcbf/cbf.hpp"
#include "rcbf/core.hpp"
#include "rcbf/mvg.hpp"
#include "rcbf/robustqp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace rcbf::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Eigen::VectorXd uniform_vec(Rng& rng, Eigen::Index n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, lo, hi);
  return v;
}

inline Eigen::MatrixXd uniform_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) m.col(j) = uniform_vec(rng, r, lo, hi);
  return m;
}

inline Eigen::VectorXd normal_vec(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

/// Random SPD matrix with eigenvalues in [lo, hi].
inline Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index n, double lo, double hi) {
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index j = 0; j < n; ++j) A.col(j) = normal_vec(rng, n);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::MatrixXd Q = qr.householderQ();
  const Eigen::VectorXd lam = uniform_vec(rng, n, lo, hi);
  const Eigen::MatrixXd S = Q * lam.asDiagonal() * Q.transpose();
  return 0.5 * (S + S.transpose());
}

/// Uniform direction on the unit sphere in R^n.
inline Eigen::VectorXd unit_vec(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v = normal_vec(rng, n);
  return v / v.norm();
}

inline Eigen::Vector2d in_disc(Rng& rng, double r) {
  const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double s = r * std::sqrt(uniform(rng, 0.0, 1.0));
  return {s * std::cos(a), s * std::sin(a)};
}

inline AgentState random_state(Rng& rng, double pos, double vel) {
  return AgentState(uniform_vec(rng, 2, -pos, pos), in_disc(rng, vel));
}

/// Robot step written out directly from x' = f(x) + g(x) u + d.
inline AgentState reference_step(const RobotDynamics& dyn, const AgentState& x, const Control& u,
                                 const Disturbance& d) {
  const AgentState f = dyn.f(x);
  AgentState out;
  out.p = f.p + d.dp;
  out.v = f.v + dyn.g_v(x) * u + d.dv;
  out.z = f.z;
  return out;
}

/// Closed-form h for the relative state.
inline double reference_h(const Eigen::Vector2d& dp, const Eigen::Vector2d& dv, double a, double ds) {
  const double r = std::hypot(dp(0), dp(1));
  const double c = (dp(0) * dv(0) + dp(1) * dv(1)) / r;
  return r >= ds ? c + std::sqrt(a * (r - ds)) : c - std::sqrt(a * (ds - r));
}

/// Chi-square density integrated by composite Simpson on [0, x].
inline double chi2_cdf_quadrature(double x, int k) {
  if (x <= 0.0) return 0.0;
  const double c = 1.0 / (std::pow(2.0, 0.5 * k) * std::tgamma(0.5 * k));
  auto pdf = [&](double t) {
    if (t <= 0.0) return k == 2 ? c : 0.0;
    return c * std::pow(t, 0.5 * k - 1.0) * std::exp(-0.5 * t);
  };
  const int n = 200000;
  const double h = x / n;
  double s = pdf(0.0) + pdf(x);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
  return s * h / 3.0;
}

/// Quantile by bisection on the quadrature CDF.
inline double chi2_quantile_quadrature(double p, int k) {
  double lo = 0.0, hi = 10.0 * k + 50.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf_quadrature(mid, k) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// max over the box vertices center + sum_i s_i r_i axis_i, s in {-1, 1}^P.
inline double vertex_worst_case(const Control& u, const AgentConstraint& b) {
  const UncertaintyPolytope& poly = b.poly;
  const Eigen::Index P = poly.axes.cols();
  const Eigen::VectorXd c = b.coeffs.h1.transpose() + b.coeffs.h2.transpose() * u;
  double best = -std::numeric_limits<double>::infinity();
  for (long mask = 0; mask < (1L << P); ++mask) {
    Eigen::VectorXd d = poly.center;
    for (Eigen::Index i = 0; i < P; ++i) {
      d += ((mask >> i) & 1 ? 1.0 : -1.0) * poly.radius(i) * poly.axes.col(i);
    }
    best = std::max(best, c.dot(d));
  }
  return best + b.coeffs.h3.dot(u);
}

/// Random 8-dimensional polytope from two random 4x4 covariance blocks.
inline UncertaintyPolytope random_polytope(Rng& rng, double scale = 0.1) {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(8, 8);
  cov.topLeftCorner(4, 4) = random_spd(rng, 4, 1e-4 * scale, scale) * scale;
  cov.bottomRightCorner(4, 4) = random_spd(rng, 4, 1e-4 * scale, scale) * scale;
  const Eigen::VectorXd mean = uniform_vec(rng, 8, -scale, scale);
  return to_polytope(make_ellipsoid(mean, cov, chi2_quantile(0.95, 8), {4, 4}));
}

/// Random coefficient block of the same shape the cbf module produces.
inline CbcCoefficients random_coefficients(Rng& rng) {
  CbcCoefficients c;
  c.h1 = uniform_vec(rng, 8, -1.0, 1.0).transpose();
  c.h2 = Eigen::MatrixXd::Zero(2, 8);
  c.h2.block(0, 0, 2, 2) = uniform_mat(rng, 2, 2, -0.2, 0.2);
  c.h2.block(0, 4, 2, 2) = uniform_mat(rng, 2, 2, -0.2, 0.2);
  c.h3 = uniform_vec(rng, 2, -1.0, 1.0).transpose();
  return c;
}

/// Uniform point on the ellipsoid boundary.
inline Eigen::VectorXd on_boundary(Rng& rng, const ConfidenceEllipsoid& e) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e.cov);
  const Eigen::VectorXd s = unit_vec(rng, e.mean.size());
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  return e.mean + es.eigenvectors() * (std::sqrt(e.k_delta) * lam.cwiseSqrt().cwiseProduct(s));
}

/// One draw of states, margins, input and capped disturbance for the CBC bound check.
struct BoundSample {
  AgentState x, xh;
  ZetaBounds zr, za;
  Control u;
  Stacked8 d;
  BarrierParams params;
};

/// Disturbance inside the magnitude caps, biased toward the cap boundary.
inline Eigen::Vector2d capped(Rng& rng, double cap) {
  const Eigen::Vector2d dir = unit_vec(rng, 2);
  const double r = uniform(rng, 0.0, 1.0) < 0.5 ? cap : cap * std::sqrt(uniform(rng, 0.0, 1.0));
  return r * dir;
}

inline BoundSample draw_bound_sample(Rng& rng, double u_max) {
  BoundSample s;
  s.params.d_s = uniform(rng, 0.5, 1.5);
  s.params.eta = uniform(rng, 0.0, 1.0);
  s.x = random_state(rng, 5.0, 1.5);
  const double sep = s.params.d_s + uniform(rng, 0.05, 5.0);
  s.xh = AgentState(s.x.p + sep * Eigen::Vector2d(unit_vec(rng, 2)), in_disc(rng, 1.6));
  s.zr = {uniform(rng, 0.0, 0.05), uniform(rng, 0.0, 0.3)};
  s.za = {uniform(rng, 0.0, 0.05), uniform(rng, 0.0, 0.3)};
  s.u = uniform(rng, 0.0, 1.0) < 0.3 ? Control(u_max * unit_vec(rng, 2)) : in_disc(rng, u_max);
  s.d << capped(rng, s.zr.zeta_p), capped(rng, s.zr.zeta_v), capped(rng, s.za.zeta_p),
      capped(rng, s.za.zeta_v);
  return s;
}

inline Eigen::MatrixXd random_inputs(Rng& rng, Eigen::Index n, Eigen::Index d, double spread) {
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) X.row(i) = uniform_vec(rng, d, -spread, spread).transpose();
  return X;
}

struct Instance {
  MvgModel model;
  Eigen::MatrixXd X, Y;
};

/// Random MVG model with a filled window, for gradient checks.
inline Instance random_instance(Rng& rng, bool noise) {
  const Eigen::Index N = 6 + static_cast<Eigen::Index>(uniform(rng, 0, 6));
  KernelParams k{uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0), noise ? uniform(rng, 0.1, 0.5) : 0.0};
  Instance in{MvgModel(k, random_spd(rng, 4, 0.3, 2.0), 50, 1e-6), random_inputs(rng, N, 4, 1.5),
              Eigen::MatrixXd()};
  in.Y = uniform_mat(rng, N, 4, -1.0, 1.0);
  return in;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }


}  // namespace rcbf::test
