#pragma once

#include "rcbf/bounds.hpp"
#include "rcbf/cbf.hpp"
#include "rcbf/qp.hpp"

#include <json.hpp>

#include <vector>

namespace rcbf {

/// Robust constraint data for one agent: the CBC bound must hold for every
/// stacked disturbance in the polytope.
struct AgentConstraint {
  CbcCoefficients coeffs;
  UncertaintyPolytope poly;
};

/// Decision vector (u, xi_1, ..., xi_N) with
///   min 1/2 |u - u_des|^2 + eps/2 sum |xi_i|^2
///   s.t. H3 u + g_i^T xi_i <= k_c,   G_i^T xi_i = H1^T + H2^T u,   xi_i >= 0,
///        a_k^T u <= u_max cos(pi / K) for K polygon facets.
/// eps is a small proximal weight that keeps xi bounded when a polytope
/// has zero width.
struct RobustProgram {
  Control u_des = Control::Zero();
  double u_max = 0.0;
  int ball_facets = 16;
  double xi_prox = 1e-10;
  std::vector<AgentConstraint> blocks;
  QpProblem qp;

  Eigen::Index equality_count() const { return qp.total_eq(); }
};

/// Radius of the circle inscribed in the K-gon whose vertices lie on |u| = u_max.
double polygon_inner_radius(double u_max, int facets);

RobustProgram assemble(const Control& u_des, std::vector<AgentConstraint> blocks,
                       double u_max, int facets = 16);

struct QpSolution {
  Control u = Control::Zero();
  std::vector<Eigen::VectorXd> xi;
  QpStatus status = QpStatus::max_iter;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool passthrough = false;  ///< u_des was already feasible
};

/// Returns u_des unchanged when it already satisfies every constraint;
/// otherwise solves the assembled QP.
QpSolution solve(const RobustProgram& prog, const QpSettings& settings = {});

/// max over the polytope of H1 d + u^T H2 d + H3 u, by enumerating its
/// 2^P box vertices.
double primal_worst_case(const Control& u, const AgentConstraint& block);

/// Same maximum in closed form for the eigenbasis box:
///   c^T center + sum_i r_i |axis_i^T c| + H3 u,  c = H1^T + H2^T u.
double box_worst_case(const Control& u, const AgentConstraint& block);

/// Full-precision dump of the program (and solution, when given).
nlohmann::json dump(const RobustProgram& prog, const QpSolution* sol = nullptr);

}  // namespace rcbf
