#pragma once

#include "rcbf/sim.hpp"

#include <random>
#include <vector>

namespace rcbf::sim_detail {

Eigen::Vector2d clamp_norm(const Eigen::Vector2d& v, double r);

/// kp * sat(goal - p) - kd v, with the position error saturated so the
/// steady-state speed does not exceed v_max.
Eigen::Vector2d pd_command(const AgentState& x, const Eigen::Vector2d& goal, double kp,
                           double kd, double v_max);

/// Command that brings the drift velocity `v_free` to rest in one step
/// through the input gain g_v, clamped to `limit`. It never reverses the
/// velocity, so repeated braking settles instead of chattering.
Eigen::Vector2d brake(const Eigen::Vector2d& v_free, const Eigen::Matrix2d& g_v, double limit);

RobotDynamics nominal_robot(const ScenarioConfig& cfg);
RobotDynamics true_robot(const ScenarioConfig& cfg);
AgentModel nominal_agent(const ScenarioConfig& cfg);

/// Semi-implicit Euler: v' = v + dt a, p' = p + dt v'.
AgentState agent_true_step(const AgentState& x, const Eigen::Vector2d& a, double dt);

/// Certainty-equivalent CBF filter used by avoider agents against every
/// neighbor inside their activation radius. Returns the applied command.
Eigen::Vector2d avoider_filter(const ScenarioConfig& cfg, const AgentState& self,
                               const AgentSpec& spec, const Eigen::Vector2d& a_des,
                               const std::vector<AgentState>& others);

/// Advances every agent one step (goals, avoidance, process noise). `rngs`
/// holds one generator per agent.
void step_agents(const ScenarioConfig& cfg, World& w, std::vector<std::mt19937_64>& rngs,
                 std::vector<AgentState>& next);

/// Robot's goal-seeking command, clipped to the inscribed control polygon.
Control robot_desired(const ScenarioConfig& cfg, const World& w);

}  // namespace rcbf::sim_detail
