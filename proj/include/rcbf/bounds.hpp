#pragma once

#include "rcbf/mvg.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace rcbf {

/// Inverse CDF of the chi-square distribution with `dof` degrees of freedom.
double chi2_quantile(double prob, int dof);
double chi2_cdf(double x, int dof);

/// Squared radius of the "n sigma" ellipsoid in `dof` dimensions: the
/// chi-square quantile at the two-sided normal mass erf(n / sqrt 2).
double sigma_level_threshold(double n_sigma, int dof);

/// {d : (d - mean)^T cov^-1 (d - mean) <= k_delta}. `blocks` lists the sizes
/// of the diagonal blocks of `cov` (a single block when unstructured).
struct ConfidenceEllipsoid {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double k_delta = 0.0;
  double delta = 0.0;
  std::vector<Eigen::Index> blocks;
  bool repaired = false;  ///< input covariance needed symmetrizing/clamping
};

ConfidenceEllipsoid make_ellipsoid(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                   double k_delta, std::vector<Eigen::Index> blocks = {});

/// Stacks robot and agent posteriors (P = 8) with a block-diagonal covariance
/// and k_delta = chi2_quantile(1 - delta, 8).
ConfidenceEllipsoid build_ellipsoid(const DisturbancePosterior& robot,
                                    const DisturbancePosterior& agent, double delta);

/// {d : G d <= g}. Rows 2i and 2i+1 are +axis_i^T and -axis_i^T; `radius(i)`
/// is the half-width along axis i and `center` the box center.
struct UncertaintyPolytope {
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
  Eigen::MatrixXd axes;  ///< P x P, column i is axis i
  Eigen::VectorXd radius;
  Eigen::VectorXd center;
  std::vector<Eigen::Index> blocks;

  Eigen::Index dim() const { return G.cols(); }
  bool contains(const Eigen::VectorXd& d, double tol) const;
};

/// Eigenbasis box around the ellipsoid. Eigenvectors are computed per
/// diagonal block so each axis is supported on a single block.
UncertaintyPolytope to_polytope(const ConfidenceEllipsoid& e);

/// The single point {0} in R^P, written as P pairs of opposing half-spaces.
UncertaintyPolytope zero_polytope(Eigen::Index P, std::vector<Eigen::Index> blocks = {});

/// Norm caps on the positional and velocity parts of one disturbance source.
struct ZetaBounds {
  double zeta_p = 0.0;
  double zeta_v = 0.0;
};

/// zeta_p = |mu_p| + sqrt(k lambda_max(Sigma_pp)), same for v; caps every
/// point of a 4-dimensional ellipsoid.
ZetaBounds zeta_from_polytope(const ConfidenceEllipsoid& e);

/// Caps valid for every point of the box (not only the inscribed ellipsoid):
/// the largest |d_p| and |d_v| over the box vertices of each 4-dimensional
/// block. Returns one entry per block.
std::vector<ZetaBounds> zeta_from_box(const UncertaintyPolytope& poly);

/// (d - mean)^T cov^-1 (d - mean); directions of zero variance contribute
/// zero when d has no component along them and infinity otherwise.
double mahalanobis_sq(const Eigen::VectorXd& d, const Eigen::VectorXd& mean,
                      const Eigen::MatrixXd& cov);

/// Lambda^-1/2 V^T (d - mean) in the eigenbasis of cov (zero-variance
/// directions map to 0).
Eigen::VectorXd whiten(const Eigen::VectorXd& d, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov);

}  // namespace rcbf
