#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace rcbf {

/// Variables private to one block. Its rows may also touch the head
/// variables (through the *_head matrices) but never another block.
struct QpBlock {
  Eigen::MatrixXd Q;  ///< n_k x n_k, PSD
  Eigen::VectorXd c;

  Eigen::MatrixXd A_head;  ///< m_k x n_h
  Eigen::MatrixXd A_own;   ///< m_k x n_k
  Eigen::VectorXd b;

  Eigen::MatrixXd C_head;  ///< p_k x n_h
  Eigen::MatrixXd C_own;   ///< p_k x n_k
  Eigen::VectorXd d;

  Eigen::Index dim() const { return Q.rows(); }
};

/// Convex QP with block-arrow structure
///   min 1/2 x^T Q x + c^T x   s.t.  A x = b,  C x <= d,
/// where x = (head, block_1, ..., block_K). The head-level A and C only
/// touch head variables.
struct QpProblem {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
  std::vector<QpBlock> blocks;

  Eigen::Index head_dim() const { return Q.rows(); }
  Eigen::Index total_dim() const;
  Eigen::Index total_eq() const;
  Eigen::Index total_ineq() const;
  void validate() const;
};

enum class QpStatus { optimal, infeasible, max_iter };

std::string to_string(QpStatus s);

struct QpSettings {
  double tol = 1e-10;
  int max_iter = 60;
  double reg_primal = 1e-12;
  double reg_dual = 1e-12;
  bool detect_infeasibility = true;
};

struct QpResult {
  QpStatus status = QpStatus::max_iter;
  Eigen::VectorXd x_head;
  std::vector<Eigen::VectorXd> x_blocks;
  Eigen::VectorXd y;  ///< equality multipliers (head rows, then block rows)
  Eigen::VectorXd z;  ///< inequality multipliers, same ordering
  int iterations = 0;
  double kkt_residual = 0.0;
  double objective = 0.0;
  /// Optimal value of the phase-I program when it ran; > 0 means infeasible.
  double phase1_value = 0.0;
};

/// Mehrotra predictor-corrector interior-point method. Each iteration
/// factors every block's KKT system separately and solves a reduced system
/// in the head variables only, then refines the direction against the
/// unregularized Newton equations. When the main phase fails to converge, a
/// phase-I program decides between infeasible and max_iter.
QpResult solve_qp(const QpProblem& prob, const QpSettings& settings = {});

}  // namespace rcbf
