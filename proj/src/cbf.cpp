#include "rcbf/cbf.hpp"

#include "rcbf/error.hpp"

#include <cmath>
#include <limits>

namespace rcbf {

void BarrierParams::validate() const {
  if (!(d_s > 0.0)) throw InvalidArgument("BarrierParams: d_s must be positive");
  if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("BarrierParams: eta must lie in [0, 1]");
  if (!(a_max_floor >= 0.0)) throw InvalidArgument("BarrierParams: a_max_floor must be >= 0");
}

double h_value(const Eigen::Vector2d& dp, const Eigen::Vector2d& dv, double a_max,
               const BarrierParams& params) {
  const double r = dp.norm();
  if (!(r > 0.0)) throw InfeasibleGeometry("h_value: coincident positions");
  if (!(a_max >= 0.0)) throw InvalidArgument("h_value: a_max must be nonnegative");
  const double closing = dp.dot(dv) / r;
  const double gap = r - params.d_s;
  return gap >= 0.0 ? closing + std::sqrt(a_max * gap) : closing - std::sqrt(-a_max * gap);
}

double cbc_exact(const RobotDynamics& dyn, const AgentModel& model_h,
                 const AgentState& x, const AgentState& x_h, const Control& u,
                 const Stacked8& d, double a_max, const BarrierParams& params) {
  const double h_t = h_value(x.p - x_h.p, x.v - x_h.v, a_max, params);
  const AgentState xn = step_robot(dyn, x, u, Disturbance::from_stacked(d.head<4>()));
  const AgentState xhn = step_agent(model_h, x_h, Disturbance::from_stacked(d.tail<4>()));
  const double h_n = h_value(xn.p - xhn.p, xn.v - xhn.v, a_max, params);
  return h_n + (params.eta - 1.0) * h_t;
}

double a_max_compute(const RobotDynamics& dyn, const AgentModel& model_h,
                     const AgentState& x, const AgentState& x_h, double zeta_v,
                     double zeta_v_h, double control_scale) {
  if (!x.finite() || !x_h.finite()) throw InvalidArgument("a_max_compute: non-finite state");
  if (!(zeta_v >= 0.0) || !(zeta_v_h >= 0.0)) {
    throw InvalidArgument("a_max_compute: zeta must be nonnegative");
  }
  const Eigen::JacobiSVD<Eigen::Matrix2d> svd(dyn.g_v(x));
  const double s_min = svd.singularValues()(1);
  const Eigen::Vector2d beta = dyn.f(x).v - model_h.f(x_h).v - (x.v - x_h.v);
  const double a = s_min * dyn.u_max() * control_scale - (beta.norm() + zeta_v + zeta_v_h);
  if (!(a > 0.0)) {
    throw AssumptionViolated("a_max_compute: actuation cannot dominate drift and disturbance");
  }
  return a;
}

double estimate_a_max_floor(const RobotDynamics& dyn, const AgentModel& model_h,
                            const std::vector<std::pair<AgentState, AgentState>>& pairs,
                            double zeta_v, double zeta_v_h, double control_scale) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [x, xh] : pairs) {
    try {
      best = std::min(best, a_max_compute(dyn, model_h, x, xh, zeta_v, zeta_v_h, control_scale));
    } catch (const AssumptionViolated&) {
    }
  }
  return std::isfinite(best) ? best : 0.0;
}

double CbcCoefficients::lower_bound(const Control& u, const Stacked8& d) const {
  return k_c - h1.dot(d) - u.dot(h2 * d) - h3.dot(u);
}

CbcCoefficients cbc_coefficients(const RobotDynamics& dyn, const AgentModel& model_h,
                                 const AgentState& x, const AgentState& x_h,
                                 const ZetaBounds& robot, const ZetaBounds& agent,
                                 double a_max, const BarrierParams& params,
                                 double u_bound) {
  params.validate();
  if (!(a_max > 0.0)) throw InvalidArgument("cbc_coefficients: a_max must be positive");
  if (u_bound < 0.0) u_bound = dyn.u_max();

  const AgentState fx = dyn.f(x);
  const AgentState fh = model_h.f(x_h);
  const Eigen::Vector2d P = fx.p - fh.p;
  const Eigen::Vector2d V = fx.v - fh.v;
  const Eigen::Matrix2d G = dyn.g_v(x);

  const double zP = robot.zeta_p + agent.zeta_p;
  const double zV = robot.zeta_v + agent.zeta_v;
  const double D0 = P.norm();
  const double Dm = D0 - zP;
  const double Dp = D0 + zP;
  const double sep_t = (x.p - x_h.p).norm();

  if (!(Dm > 0.0)) throw InfeasibleGeometry("cbc_coefficients: predicted separation not positive");
  if (Dm - params.d_s < 0.0) {
    throw InfeasibleGeometry("cbc_coefficients: predicted separation inside the margin");
  }
  if (sep_t < params.d_s) throw InfeasibleGeometry("cbc_coefficients: current separation inside the margin");

  CbcCoefficients c;
  c.den_minus = Dm;
  c.den_plus = Dp;
  c.h_t = h_value(x.p - x_h.p, x.v - x_h.v, a_max, params);

  c.h1.resize(8);
  c.h1 << -V.transpose() / Dm, -P.transpose() / Dm, V.transpose() / Dm, P.transpose() / Dm;

  c.h2 = Eigen::MatrixXd::Zero(2, 8);
  c.h2.block<2, 2>(0, 0) = -G.transpose() / Dm;
  c.h2.block<2, 2>(0, 4) = G.transpose() / Dm;

  c.h3 = -(P.transpose() * G) / Dp;

  const double pv = P.dot(V);
  const double first = std::min(pv / Dm, pv / Dp);
  const double cross = (robot.zeta_p * robot.zeta_v + robot.zeta_p * agent.zeta_v +
                        agent.zeta_v * agent.zeta_p + robot.zeta_v * agent.zeta_p) / Dm;

  // Each fraction above is evaluated at one end of [Dm, Dp]; the remaining
  // numerators (P^T G u, e_p^T V, P^T e_v, e_p^T G u) can take either sign,
  // so bound their error against the true denominator.
  const double g_norm = Eigen::JacobiSVD<Eigen::Matrix2d>(G).singularValues()(0);
  c.denominator_slack = (1.0 / Dm - 1.0 / Dp) *
                        ((G.transpose() * P).norm() * u_bound + V.norm() * zP + D0 * zV +
                         g_norm * u_bound * zP);

  c.k_c = first + std::sqrt(a_max * (Dm - params.d_s)) + (params.eta - 1.0) * c.h_t - cross -
          c.denominator_slack;
  if (!std::isfinite(c.k_c) || !c.h1.allFinite() || !c.h2.allFinite() || !c.h3.allFinite()) {
    throw NumericalError("cbc_coefficients: non-finite coefficient");
  }
  return c;
}

}  // namespace rcbf
