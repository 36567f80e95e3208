#include "rcbf/robustqp.hpp"

#include "rcbf/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rcbf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double polygon_inner_radius(double u_max, int facets) {
  return u_max * std::cos(std::numbers::pi / facets);
}

namespace {

Eigen::Matrix<double, Eigen::Dynamic, 2> polygon_rows(int K) {
  Eigen::Matrix<double, Eigen::Dynamic, 2> A(K, 2);
  for (int k = 0; k < K; ++k) {
    const double th = 2.0 * std::numbers::pi * k / K;
    A(k, 0) = std::cos(th);
    A(k, 1) = std::sin(th);
  }
  return A;
}

void check_block(const AgentConstraint& b) {
  const Index P = b.poly.G.cols();
  if (b.poly.G.rows() != 2 * P || b.poly.g.size() != 2 * P) {
    throw InvalidArgument("assemble: polytope must have 2P rows");
  }
  if (b.coeffs.h1.size() != P || b.coeffs.h2.rows() != 2 || b.coeffs.h2.cols() != P) {
    throw InvalidArgument("assemble: coefficient dimensions do not match the polytope");
  }
  if (b.poly.axes.rows() != P || b.poly.radius.size() != P || b.poly.center.size() != P) {
    throw InvalidArgument("assemble: polytope box data missing");
  }
}

}  // namespace

RobustProgram assemble(const Control& u_des, std::vector<AgentConstraint> blocks,
                       double u_max, int facets) {
  if (facets < 8) throw InvalidArgument("assemble: at least 8 facets required");
  if (!(u_max > 0.0) || !u_des.allFinite()) throw InvalidArgument("assemble: bad control data");
  for (const auto& b : blocks) check_block(b);

  RobustProgram prog;
  prog.u_des = u_des;
  prog.u_max = u_max;
  prog.ball_facets = facets;
  prog.blocks = std::move(blocks);

  QpProblem& qp = prog.qp;
  qp.Q = MatrixXd::Identity(2, 2);
  qp.c = -u_des;
  qp.A.resize(0, 2);
  qp.b.resize(0);
  qp.C = polygon_rows(facets);
  qp.d = VectorXd::Constant(facets, polygon_inner_radius(u_max, facets));

  for (const AgentConstraint& ac : prog.blocks) {
    const Index P = ac.poly.G.cols();
    const Index R = ac.poly.G.rows();
    QpBlock b;
    b.Q = MatrixXd::Identity(R, R) * prog.xi_prox;
    b.c = VectorXd::Zero(R);

    // G^T xi - H2^T u = H1^T, each row scaled to unit norm.
    b.A_own = ac.poly.G.transpose();
    b.A_head = -ac.coeffs.h2.transpose();
    b.b = ac.coeffs.h1.transpose();
    for (Index i = 0; i < P; ++i) {
      const double nrm = std::sqrt(b.A_own.row(i).squaredNorm() + b.A_head.row(i).squaredNorm());
      if (nrm > 0.0) {
        b.A_own.row(i) /= nrm;
        b.A_head.row(i) /= nrm;
        b.b(i) /= nrm;
      }
    }

    b.C_head = MatrixXd::Zero(R + 1, 2);
    b.C_own = MatrixXd::Zero(R + 1, R);
    b.d = VectorXd::Zero(R + 1);
    b.C_head.row(0) = ac.coeffs.h3;
    b.C_own.row(0) = ac.poly.g.transpose();
    b.d(0) = ac.coeffs.k_c;
    b.C_own.bottomRows(R) = -MatrixXd::Identity(R, R);
    qp.blocks.push_back(std::move(b));
  }
  qp.validate();
  return prog;
}

double primal_worst_case(const Control& u, const AgentConstraint& block) {
  const UncertaintyPolytope& poly = block.poly;
  const Index P = poly.center.size();
  if (P > 20) throw InvalidArgument("primal_worst_case: too many vertices to enumerate");
  const VectorXd c = block.coeffs.h1.transpose() + block.coeffs.h2.transpose() * u;
  const VectorXd cu = poly.axes.transpose() * c;  // c along each axis
  const double base = c.dot(poly.center);
  double best = -std::numeric_limits<double>::infinity();
  const std::uint32_t n = 1u << P;
  for (std::uint32_t mask = 0; mask < n; ++mask) {
    double v = base;
    for (Index i = 0; i < P; ++i) {
      v += ((mask >> i) & 1u ? 1.0 : -1.0) * poly.radius(i) * cu(i);
    }
    best = std::max(best, v);
  }
  return best + block.coeffs.h3.dot(u);
}

double box_worst_case(const Control& u, const AgentConstraint& block) {
  const UncertaintyPolytope& poly = block.poly;
  const VectorXd c = block.coeffs.h1.transpose() + block.coeffs.h2.transpose() * u;
  const VectorXd cu = poly.axes.transpose() * c;
  return c.dot(poly.center) + poly.radius.dot(cu.cwiseAbs()) + block.coeffs.h3.dot(u);
}

namespace {

bool in_polygon(const RobustProgram& prog, const Control& u) {
  return ((prog.qp.C * u - prog.qp.d).array() <= 0.0).all();
}

// Multipliers certifying u: xi_2i = max(axis_i^T c, 0), xi_2i+1 = max(-axis_i^T c, 0).
VectorXd box_multipliers(const Control& u, const AgentConstraint& block) {
  const VectorXd c = block.coeffs.h1.transpose() + block.coeffs.h2.transpose() * u;
  const VectorXd cu = block.poly.axes.transpose() * c;
  VectorXd xi(2 * cu.size());
  for (Index i = 0; i < cu.size(); ++i) {
    xi(2 * i) = std::max(cu(i), 0.0);
    xi(2 * i + 1) = std::max(-cu(i), 0.0);
  }
  return xi;
}

}  // namespace

QpSolution solve(const RobustProgram& prog, const QpSettings& settings) {
  QpSolution sol;
  bool feasible = in_polygon(prog, prog.u_des);
  for (std::size_t i = 0; feasible && i < prog.blocks.size(); ++i) {
    feasible = box_worst_case(prog.u_des, prog.blocks[i]) <= prog.blocks[i].coeffs.k_c;
  }
  if (feasible) {
    sol.u = prog.u_des;
    for (const auto& b : prog.blocks) sol.xi.push_back(box_multipliers(sol.u, b));
    sol.status = QpStatus::optimal;
    sol.passthrough = true;
    return sol;
  }

  const QpResult r = solve_qp(prog.qp, settings);
  sol.u = r.x_head;
  sol.xi = r.x_blocks;
  sol.status = r.status;
  sol.kkt_residual = r.kkt_residual;
  sol.iterations = r.iterations;
  return sol;
}

namespace {

nlohmann::json mat_json(const MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < M.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(M.cols()));
    for (Index c = 0; c < M.cols(); ++c) row[static_cast<std::size_t>(c)] = M(r, c);
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json vec_json(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

nlohmann::json dump(const RobustProgram& prog, const QpSolution* sol) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["objective"] = "0.5*|u-u_des|^2 + 0.5*xi_prox*sum|xi|^2";
  j["u_des"] = vec_json(prog.u_des);
  j["u_max"] = prog.u_max;
  j["ball_facets"] = prog.ball_facets;
  j["xi_prox"] = prog.xi_prox;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : prog.blocks) {
    blocks.push_back({{"k_c", b.coeffs.k_c},
                      {"h1", vec_json(b.coeffs.h1.transpose())},
                      {"h2", mat_json(b.coeffs.h2)},
                      {"h3", vec_json(b.coeffs.h3.transpose())},
                      {"G", mat_json(b.poly.G)},
                      {"g", vec_json(b.poly.g)}});
  }
  j["blocks"] = std::move(blocks);
  if (sol) {
    nlohmann::json xs = nlohmann::json::array();
    for (const auto& x : sol->xi) xs.push_back(vec_json(x));
    j["solution"] = {{"u", vec_json(sol->u)},
                     {"xi", std::move(xs)},
                     {"status", to_string(sol->status)},
                     {"kkt_residual", sol->kkt_residual},
                     {"iterations", sol->iterations},
                     {"passthrough", sol->passthrough}};
  }
  return j;
}

}  // namespace rcbf
