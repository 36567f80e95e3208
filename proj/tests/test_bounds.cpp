#include "support.hpp"

#include "rcbf/bounds.hpp"
#include "rcbf/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace rcbf;
using namespace rcbf::test;

namespace {

DisturbancePosterior posterior_of(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  DisturbancePosterior p;
  p.mean = mean;
  p.cov = cov;
  p.variance = 1.0;
  return p;
}


}  // namespace

TEST_SUITE("bounds") {

TEST_CASE("chi2 median with two degrees of freedom") {
  CHECK(std::abs(chi2_quantile(0.5, 2) - 2.0 * std::log(2.0)) < 1e-9);
}

TEST_CASE("chi2 0.95 quantile with eight degrees of freedom matches quadrature") {
  const double q = chi2_quantile(0.95, 8);
  CHECK(std::abs(q - chi2_quantile_quadrature(0.95, 8)) < 1e-6);
}

TEST_CASE("chi2 quantile and CDF round-trip") {
  Rng rng(41);
  for (int i = 0; i < 100; ++i) {
    const double p = uniform(rng, 0.01, 0.99);
    const int k = 1 + static_cast<int>(uniform(rng, 0, 12));
    CHECK(chi2_cdf(chi2_quantile(p, k), k) == doctest::Approx(p).epsilon(1e-9));
  }
  // Independent forward CDF at a few points.
  for (int k : {2, 4, 8}) {
    for (double x : {0.5, 3.0, 9.0}) CHECK(chi2_cdf(x, k) == doctest::Approx(chi2_cdf_quadrature(x, k)).epsilon(1e-9));
  }
}

TEST_CASE("chi2 quantile is strictly increasing in prob and dof") {
  for (int k = 1; k <= 16; ++k) {
    double prev = 0.0;
    for (int i = 1; i < 100; ++i) {
      const double q = chi2_quantile(i / 100.0, k);
      CHECK(q > prev);
      prev = q;
    }
  }
  for (double p : {0.05, 0.5, 0.95, 0.999}) {
    for (int k = 1; k < 16; ++k) CHECK(chi2_quantile(p, k + 1) > chi2_quantile(p, k));
  }
}

TEST_CASE("chi2 quantile rejects probabilities outside (0, 1)") {
  CHECK_THROWS_AS(chi2_quantile(0.0, 3), InvalidArgument);
  CHECK_THROWS_AS(chi2_quantile(1.0, 3), InvalidArgument);
  CHECK_THROWS_AS(chi2_quantile(-0.2, 3), InvalidArgument);
  CHECK_THROWS_AS(chi2_quantile(0.5, 0), InvalidArgument);
}

TEST_CASE("sigma-level thresholds carry the normal two-sided mass") {
  for (int dof : {1, 2, 4}) {
    CHECK(chi2_cdf(sigma_level_threshold(2.0, dof), dof) == doctest::Approx(std::erf(2.0 / std::sqrt(2.0))));
  }
  CHECK(sigma_level_threshold(2.0, 1) == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(sigma_level_threshold(3.0, 1) == doctest::Approx(9.0).epsilon(1e-10));
}

TEST_CASE("standard posteriors give the unit ball when k is one") {
  const auto I = Eigen::MatrixXd::Identity(4, 4);
  const auto z = Eigen::VectorXd::Zero(4);
  const double delta = 1.0 - chi2_cdf(1.0, 8);
  const ConfidenceEllipsoid e = build_ellipsoid(posterior_of(z, I), posterior_of(z, I), delta);
  CHECK(e.k_delta == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((e.cov - Eigen::MatrixXd::Identity(8, 8)).norm() == 0.0);
  CHECK(e.mean.norm() == 0.0);
}

TEST_CASE("confidence level 0.05 uses the 0.95 quantile in eight dimensions") {
  Rng rng(42);
  const ConfidenceEllipsoid e = build_ellipsoid(posterior_of(uniform_vec(rng, 4, -1, 1), random_spd(rng, 4, 0.1, 1)),
                                                posterior_of(uniform_vec(rng, 4, -1, 1), random_spd(rng, 4, 0.1, 1)),
                                                0.05);
  CHECK(std::abs(e.k_delta - chi2_quantile_quadrature(0.95, 8)) < 1e-6);
  CHECK(e.cov.topRightCorner(4, 4).cwiseAbs().maxCoeff() == 0.0);
  CHECK(e.cov.bottomLeftCorner(4, 4).cwiseAbs().maxCoeff() == 0.0);
  CHECK(e.delta == 0.05);
}

TEST_CASE("non-PSD posterior covariance is repaired") {
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(4, 4);
  bad(0, 0) = -1e-3;
  bad(1, 2) = 0.1;
  const ConfidenceEllipsoid e =
      build_ellipsoid(posterior_of(Eigen::VectorXd::Zero(4), bad),
                      posterior_of(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4)), 0.05);
  CHECK(e.repaired);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e.cov);
  CHECK(es.eigenvalues().minCoeff() >= 0.0);
  CHECK((e.cov - e.cov.transpose()).norm() == 0.0);
}

TEST_CASE("diagonal covariance gives the axis-aligned box") {
  Eigen::Vector2d mean(1, 0);
  const Eigen::Matrix2d cov = Eigen::Vector2d(4, 1).asDiagonal();
  const UncertaintyPolytope poly = to_polytope(make_ellipsoid(mean, cov, 1.0));
  // Corners of [-1, 3] x [-1, 1] are inside, points just beyond each face are not.
  for (double x : {-1.0, 3.0}) {
    for (double y : {-1.0, 1.0}) CHECK(poly.contains(Eigen::Vector2d(x, y), 1e-12));
  }
  CHECK_FALSE(poly.contains(Eigen::Vector2d(3.001, 0), 1e-9));
  CHECK_FALSE(poly.contains(Eigen::Vector2d(-1.001, 0), 1e-9));
  CHECK_FALSE(poly.contains(Eigen::Vector2d(1, 1.001), 1e-9));
  CHECK_FALSE(poly.contains(Eigen::Vector2d(1, -1.001), 1e-9));
  REQUIRE(poly.G.rows() == 4);
  for (Eigen::Index i = 0; i < 2; ++i) CHECK((poly.G.row(2 * i) + poly.G.row(2 * i + 1)).norm() == 0.0);
}

TEST_CASE("identity covariance gives the unit hypercube") {
  const UncertaintyPolytope poly = to_polytope(make_ellipsoid(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3), 1.0));
  CHECK(poly.g.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
  CHECK(poly.g.cwiseAbs().minCoeff() == doctest::Approx(1.0));
  CHECK(poly.contains(Eigen::Vector3d(1, -1, 1), 1e-12));
  CHECK_FALSE(poly.contains(Eigen::Vector3d(1.01, 0, 0), 1e-9));
}

TEST_CASE("polytopes contain their ellipsoids and touch every facet") {
  Rng rng(43);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(8, 8);
    cov.topLeftCorner(4, 4) = random_spd(rng, 4, 1e-3, 2.0);
    cov.bottomRightCorner(4, 4) = random_spd(rng, 4, 1e-3, 2.0);
    const ConfidenceEllipsoid e = make_ellipsoid(uniform_vec(rng, 8, -1, 1), cov, chi2_quantile(0.95, 8), {4, 4});
    const UncertaintyPolytope poly = to_polytope(e);
    REQUIRE(poly.G.rows() == 16);
    double worst = -1.0;
    for (int s = 0; s < 1000; ++s) worst = std::max(worst, (poly.G * on_boundary(rng, e) - poly.g).maxCoeff());
    CHECK(worst <= 1e-9);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (e.cov + e.cov.transpose()));
    for (Eigen::Index i = 0; i < 8; ++i) {
      const Eigen::VectorXd u = es.eigenvectors().col(i);
      const double r = std::sqrt(e.k_delta * std::max(0.0, es.eigenvalues()(i)));
      for (double sgn : {1.0, -1.0}) {
        const Eigen::VectorXd pt = e.mean + sgn * r * u;
        const Eigen::VectorXd slack = poly.g - poly.G * pt;
        CHECK(slack.minCoeff() > -1e-9);
        CHECK(slack.minCoeff() < 1e-9);  // some facet is touched
      }
    }
    // Row pairs: row 2i = +axis, row 2i+1 = -axis.
    for (Eigen::Index i = 0; i < 8; ++i) CHECK((poly.G.row(2 * i) + poly.G.row(2 * i + 1)).norm() == 0.0);
  }
}

TEST_CASE("ten thousand boundary samples of one ellipsoid stay inside") {
  Rng rng(44);
  Eigen::MatrixXd cov = random_spd(rng, 8, 1e-4, 1.0);
  const ConfidenceEllipsoid e = make_ellipsoid(uniform_vec(rng, 8, -1, 1), cov, chi2_quantile(0.95, 8));
  const UncertaintyPolytope poly = to_polytope(e);
  int bad = 0;
  for (int s = 0; s < 10000; ++s) bad += poly.contains(on_boundary(rng, e), 1e-9) ? 0 : 1;
  CHECK(bad == 0);
}

TEST_CASE("zero eigenvalues keep their paired rows as a slab") {
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  cov(0, 0) = 1.0;
  const UncertaintyPolytope poly = to_polytope(make_ellipsoid(Eigen::Vector3d(0, 2, 0), cov, 4.0));
  CHECK(poly.G.rows() == 6);
  CHECK(poly.contains(Eigen::Vector3d(2, 2, 0), 1e-12));
  CHECK_FALSE(poly.contains(Eigen::Vector3d(0, 2.01, 0), 1e-9));
  const UncertaintyPolytope z = zero_polytope(8, {4, 4});
  CHECK(z.G.rows() == 16);
  CHECK(z.contains(Eigen::VectorXd::Zero(8), 0.0));
}

TEST_CASE("Gaussian draws land in the ellipsoid at the nominal rate") {
  Rng rng(45);
  const Eigen::MatrixXd cov = random_spd(rng, 8, 0.05, 2.0);
  const Eigen::VectorXd mean = uniform_vec(rng, 8, -1, 1);
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const double k = chi2_quantile(0.95, 8);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd d = mean + llt.matrixL() * normal_vec(rng, 8);
    hits += mahalanobis_sq(d, mean, cov) <= k ? 1 : 0;
  }
  CHECK(std::abs(static_cast<double>(hits) / n - 0.95) < 0.015);
}

TEST_CASE("zeta caps for simple ellipsoids") {
  const ConfidenceEllipsoid e = make_ellipsoid(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4), 1.0);
  const ZetaBounds z = zeta_from_polytope(e);
  CHECK(z.zeta_p == doctest::Approx(1.0));
  CHECK(z.zeta_v == doctest::Approx(1.0));
  Eigen::Vector4d mean(3, 4, 0, 0);
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  cov.bottomRightCorner<2, 2>() = Eigen::Matrix2d::Identity();
  CHECK(zeta_from_polytope(make_ellipsoid(mean, cov, 1.0)).zeta_p == doctest::Approx(5.0));
}

TEST_CASE("zeta caps every sampled ellipsoid point") {
  Rng rng(46);
  for (int rep = 0; rep < 10; ++rep) {
    const ConfidenceEllipsoid e = make_ellipsoid(uniform_vec(rng, 4, -1, 1), random_spd(rng, 4, 1e-3, 1.0), chi2_quantile(0.95, 4));
    const ZetaBounds z = zeta_from_polytope(e);
    double mp = 0.0, mv = 0.0;
    for (int s = 0; s < 1000; ++s) {
      const Eigen::VectorXd d = on_boundary(rng, e);
      mp = std::max(mp, d.head<2>().norm());
      mv = std::max(mv, d.tail<2>().norm());
    }
    CHECK(mp <= z.zeta_p + 1e-12);
    CHECK(mv <= z.zeta_v + 1e-12);
  }
}

TEST_CASE("box zeta caps every box vertex of each block") {
  Rng rng(47);
  for (int rep = 0; rep < 20; ++rep) {
    const UncertaintyPolytope poly = random_polytope(rng, 0.5);
    const auto z = zeta_from_box(poly);
    REQUIRE(z.size() == 2);
    for (long mask = 0; mask < 256; ++mask) {
      Eigen::VectorXd d = poly.center;
      for (Eigen::Index i = 0; i < 8; ++i) d += ((mask >> i) & 1 ? 1.0 : -1.0) * poly.radius(i) * poly.axes.col(i);
      CHECK(d.segment<2>(0).norm() <= z[0].zeta_p + 1e-12);
      CHECK(d.segment<2>(2).norm() <= z[0].zeta_v + 1e-12);
      CHECK(d.segment<2>(4).norm() <= z[1].zeta_p + 1e-12);
      CHECK(d.segment<2>(6).norm() <= z[1].zeta_v + 1e-12);
    }
  }
}

TEST_CASE("mahalanobis distance and whitening") {
  const Eigen::Vector2d mean(1, 1);
  const Eigen::Matrix2d cov = Eigen::Vector2d(4, 1).asDiagonal();
  CHECK(mahalanobis_sq(Eigen::Vector2d(3, 2), mean, cov) == doctest::Approx(2.0));
  const Eigen::VectorXd w = whiten(Eigen::Vector2d(3, 2), mean, cov);
  CHECK(w.squaredNorm() == doctest::Approx(2.0));
  Eigen::Matrix2d sing = Eigen::Matrix2d::Zero();
  sing(0, 0) = 1.0;
  CHECK(mahalanobis_sq(Eigen::Vector2d(2, 1), mean, sing) == doctest::Approx(1.0));
  CHECK(std::isinf(mahalanobis_sq(Eigen::Vector2d(1, 2), mean, sing)));
}

}  // TEST_SUITE
