#pragma once

#include <Eigen/Dense>

#include <functional>

namespace rcbf {

using Control = Eigen::Vector2d;

/// State of one agent (robot or other) at one step.
///
/// `p` and `v` are planar position [m] and velocity [m/s]; `z` holds any
/// additional states and may be empty.
struct AgentState {
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  Eigen::VectorXd z;

  AgentState() = default;
  AgentState(const Eigen::Vector2d& position, const Eigen::Vector2d& velocity)
      : p(position), v(velocity) {}

  bool finite() const;

  /// (p, v) stacked; the regression input of the disturbance models.
  Eigen::Vector4d features() const;
};

/// Additive positional and velocity disturbance of one transition.
struct Disturbance {
  Eigen::Vector2d dp = Eigen::Vector2d::Zero();
  Eigen::Vector2d dv = Eigen::Vector2d::Zero();

  bool finite() const;
  Eigen::Vector4d stacked() const;
  static Disturbance from_stacked(const Eigen::Vector4d& d);
};

/// Known part of the robot's control-affine, discrete-time dynamics
///
///   x_{t+1} = f(x_t) + g(x_t) u_t + d(x_t)
///
/// with relative degree two in position: the positional rows of g are zero
/// by construction, so only the velocity gain g_v (and optionally g_z) is
/// supplied.
class RobotDynamics {
 public:
  using DriftFn = std::function<AgentState(const AgentState&)>;
  using VelocityGainFn = std::function<Eigen::Matrix2d(const AgentState&)>;
  using ExtraGainFn = std::function<Eigen::MatrixXd(const AgentState&)>;

  RobotDynamics(DriftFn drift, VelocityGainFn gain_v, double u_max, double dt,
                ExtraGainFn gain_z = {});

  /// Shipped simulator robot: damped double integrator with a
  /// speed-dependent actuator gain,
  ///   f_p = p + dt v,  f_v = v - drag dt v,  g_v = dt (1 + boost / (1 + |v|^2)) I.
  static RobotDynamics damped_double_integrator(double dt, double u_max,
                                                double drag = 0.1,
                                                double boost = 0.2);

  /// f_p = p + dt v, f_v = v, g_v = dt I.
  static RobotDynamics double_integrator(double dt, double u_max);

  AgentState f(const AgentState& x) const { return drift_(x); }
  Eigen::Matrix2d g_v(const AgentState& x) const { return gain_v_(x); }

  /// Full (4 + dim z) x 2 input gain; rows 0-1 are exactly zero. Throws
  /// InvalidArgument when sigma_min(g_v) <= 1e-9.
  Eigen::MatrixXd g(const AgentState& x) const;

  double u_max() const { return u_max_; }
  double dt() const { return dt_; }

 private:
  DriftFn drift_;
  VelocityGainFn gain_v_;
  ExtraGainFn gain_z_;
  double u_max_;
  double dt_;
};

/// The robot's nominal model of another agent's autonomous dynamics,
/// x_{t+1} = f_i(x_t) + d_i(x_t).
class AgentModel {
 public:
  using DriftFn = std::function<AgentState(const AgentState&)>;

  explicit AgentModel(DriftFn drift) : drift_(std::move(drift)) {}

  /// f_p = p + dt v, f_v = v.
  static AgentModel constant_velocity(double dt);

  AgentState f(const AgentState& x) const { return drift_(x); }

 private:
  DriftFn drift_;
};

AgentState step_robot(const RobotDynamics& dyn, const AgentState& x,
                      const Control& u, const Disturbance& d);

AgentState step_agent(const AgentModel& model, const AgentState& x,
                      const Disturbance& d);

/// Residual d = x_next - f(x_t) - g(x_t) u for the robot.
Disturbance extract_disturbance(const RobotDynamics& dyn, const AgentState& x_t,
                                const AgentState& x_next, const Control& u);

/// Residual d = x_next - f_i(x_t) for another agent.
Disturbance extract_disturbance(const AgentModel& model, const AgentState& x_t,
                                const AgentState& x_next);

}  // namespace rcbf
