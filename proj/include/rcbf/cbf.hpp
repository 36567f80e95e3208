#pragma once

#include "rcbf/bounds.hpp"
#include "rcbf/core.hpp"

#include <Eigen/Dense>

#include <vector>

namespace rcbf {

using Stacked8 = Eigen::Matrix<double, 8, 1>;

struct BarrierParams {
  double d_s = 1.0;          ///< collision margin [m]
  double eta = 0.5;          ///< CBC decay rate in [0, 1]
  double a_max_floor = 0.0;  ///< reporting floor for a_max; 0 disables

  void validate() const;
};

/// dp^T dv / |dp| + sqrt(a_max (|dp| - D_s)); inside D_s the root term
/// changes sign so the value stays finite and negative.
double h_value(const Eigen::Vector2d& dp, const Eigen::Vector2d& dv, double a_max,
               const BarrierParams& params);

/// h(x_{t+1}) + (eta - 1) h(x_t) for the robot-agent pair, with the next
/// states produced by the dynamics under control u and stacked disturbance
/// d = [d_p, d_v, d_p^h, d_v^h].
double cbc_exact(const RobotDynamics& dyn, const AgentModel& model_h,
                 const AgentState& x, const AgentState& x_h, const Control& u,
                 const Stacked8& d, double a_max, const BarrierParams& params);

/// Worst-case guaranteed relative acceleration (per step):
///   sigma_min(g_v(x)) u_max scale - (|f_v(x) - f_v^h(x_h) - dv_t| + zeta_v + zeta_v^h).
/// `control_scale` shrinks u_max when the control set is an inscribed polygon.
/// Throws AssumptionViolated when the result is not positive.
double a_max_compute(const RobotDynamics& dyn, const AgentModel& model_h,
                     const AgentState& x, const AgentState& x_h, double zeta_v,
                     double zeta_v_h, double control_scale = 1.0);

/// Smallest positive a_max over a sample of operating pairs; pairs where the
/// assumption fails are skipped. Returns 0 when none qualify.
double estimate_a_max_floor(const RobotDynamics& dyn, const AgentModel& model_h,
                            const std::vector<std::pair<AgentState, AgentState>>& pairs,
                            double zeta_v, double zeta_v_h, double control_scale = 1.0);

/// Linear-in-d, bilinear-in-(u, d) lower bound of the exact CBC:
///   cbc_exact >= k_c - h1 d - u^T h2 d - h3 u.
struct CbcCoefficients {
  double k_c = 0.0;
  Eigen::RowVectorXd h1;  ///< 1 x 8
  Eigen::MatrixXd h2;     ///< 2 x 8
  Eigen::RowVector2d h3 = Eigen::RowVector2d::Zero();

  double den_minus = 0.0;
  double den_plus = 0.0;
  double h_t = 0.0;
  /// Penalty folded into k_c for evaluating each fraction at a single
  /// denominator although the true separation ranges over [den-, den+].
  double denominator_slack = 0.0;

  double lower_bound(const Control& u, const Stacked8& d) const;
};

/// Builds the coefficients for one robot-agent pair given norm caps on each
/// source's disturbance. `u_bound` caps |u| in the slack term and defaults to
/// dyn.u_max(). Throws InfeasibleGeometry when the separation is too small
/// for the bound to be defined.
CbcCoefficients cbc_coefficients(const RobotDynamics& dyn, const AgentModel& model_h,
                                 const AgentState& x, const AgentState& x_h,
                                 const ZetaBounds& robot, const ZetaBounds& agent,
                                 double a_max, const BarrierParams& params,
                                 double u_bound = -1.0);

}  // namespace rcbf
