#include "rcbf/core.hpp"

#include "rcbf/error.hpp"

namespace rcbf {

bool AgentState::finite() const {
  return p.allFinite() && v.allFinite() && (z.size() == 0 || z.allFinite());
}

Eigen::Vector4d AgentState::features() const {
  Eigen::Vector4d out;
  out << p, v;
  return out;
}

bool Disturbance::finite() const { return dp.allFinite() && dv.allFinite(); }

Eigen::Vector4d Disturbance::stacked() const {
  Eigen::Vector4d out;
  out << dp, dv;
  return out;
}

Disturbance Disturbance::from_stacked(const Eigen::Vector4d& d) {
  Disturbance out;
  out.dp = d.head<2>();
  out.dv = d.tail<2>();
  return out;
}

RobotDynamics::RobotDynamics(DriftFn drift, VelocityGainFn gain_v, double u_max,
                             double dt, ExtraGainFn gain_z)
    : drift_(std::move(drift)),
      gain_v_(std::move(gain_v)),
      gain_z_(std::move(gain_z)),
      u_max_(u_max),
      dt_(dt) {
  if (!drift_ || !gain_v_) {
    throw InvalidArgument("RobotDynamics: drift and velocity gain are required");
  }
  if (!(u_max > 0.0) || !(dt > 0.0)) {
    throw InvalidArgument("RobotDynamics: u_max and dt must be positive");
  }
}

RobotDynamics RobotDynamics::damped_double_integrator(double dt, double u_max,
                                                      double drag,
                                                      double boost) {
  auto drift = [dt, drag](const AgentState& x) {
    AgentState out = x;
    out.p = x.p + dt * x.v;
    out.v = x.v - drag * dt * x.v;
    return out;
  };
  auto gain = [dt, boost](const AgentState& x) -> Eigen::Matrix2d {
    const double scale = 1.0 + boost / (1.0 + x.v.squaredNorm());
    return dt * scale * Eigen::Matrix2d::Identity();
  };
  return RobotDynamics(drift, gain, u_max, dt);
}

RobotDynamics RobotDynamics::double_integrator(double dt, double u_max) {
  auto drift = [dt](const AgentState& x) {
    AgentState out = x;
    out.p = x.p + dt * x.v;
    return out;
  };
  auto gain = [dt](const AgentState&) -> Eigen::Matrix2d {
    return dt * Eigen::Matrix2d::Identity();
  };
  return RobotDynamics(drift, gain, u_max, dt);
}

Eigen::MatrixXd RobotDynamics::g(const AgentState& x) const {
  const Eigen::Index nz = x.z.size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(4 + nz, 2);
  const Eigen::Matrix2d gv = gain_v_(x);
  if (!(Eigen::JacobiSVD<Eigen::Matrix2d>(gv).singularValues()(1) > 1e-9)) {
    throw InvalidArgument("RobotDynamics::g: velocity gain is not invertible");
  }
  out.block<2, 2>(2, 0) = gv;
  if (nz > 0 && gain_z_) {
    out.bottomRows(nz) = gain_z_(x);
  }
  return out;
}

AgentModel AgentModel::constant_velocity(double dt) {
  return AgentModel([dt](const AgentState& x) {
    AgentState out = x;
    out.p = x.p + dt * x.v;
    return out;
  });
}

AgentState step_robot(const RobotDynamics& dyn, const AgentState& x,
                      const Control& u, const Disturbance& d) {
  if (!x.finite() || !u.allFinite() || !d.finite()) {
    throw InvalidArgument("step_robot: non-finite input");
  }
  if (u.norm() > dyn.u_max() + 1e-9) {
    throw InvalidArgument("step_robot: control exceeds u_max");
  }
  AgentState next = dyn.f(x);
  const Eigen::VectorXd gu = dyn.g(x) * u;
  next.p += gu.head<2>() + d.dp;
  next.v += gu.segment<2>(2) + d.dv;
  if (next.z.size() > 0) {
    next.z += gu.tail(next.z.size());
  }
  return next;
}

AgentState step_agent(const AgentModel& model, const AgentState& x,
                      const Disturbance& d) {
  if (!x.finite() || !d.finite()) {
    throw InvalidArgument("step_agent: non-finite input");
  }
  AgentState next = model.f(x);
  next.p += d.dp;
  next.v += d.dv;
  return next;
}

Disturbance extract_disturbance(const RobotDynamics& dyn, const AgentState& x_t,
                                const AgentState& x_next, const Control& u) {
  if (!x_t.finite() || !x_next.finite() || !u.allFinite()) {
    throw InvalidArgument("extract_disturbance: non-finite input");
  }
  const AgentState drift = dyn.f(x_t);
  const Eigen::VectorXd gu = dyn.g(x_t) * u;
  Disturbance d;
  d.dp = x_next.p - drift.p - gu.head<2>();
  d.dv = x_next.v - drift.v - gu.segment<2>(2);
  return d;
}

Disturbance extract_disturbance(const AgentModel& model, const AgentState& x_t,
                                const AgentState& x_next) {
  if (!x_t.finite() || !x_next.finite()) {
    throw InvalidArgument("extract_disturbance: non-finite input");
  }
  const AgentState drift = model.f(x_t);
  Disturbance d;
  d.dp = x_next.p - drift.p;
  d.dv = x_next.v - drift.v;
  return d;
}

}  // namespace rcbf
