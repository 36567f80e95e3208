#include "rcbf/qp.hpp"

#include "rcbf/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rcbf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

Index QpProblem::total_dim() const {
  Index n = head_dim();
  for (const auto& b : blocks) n += b.dim();
  return n;
}

Index QpProblem::total_eq() const {
  Index m = A.rows();
  for (const auto& b : blocks) m += b.A_own.rows();
  return m;
}

Index QpProblem::total_ineq() const {
  Index p = C.rows();
  for (const auto& b : blocks) p += b.C_own.rows();
  return p;
}

void QpProblem::validate() const {
  const Index nh = head_dim();
  auto bad = [](const char* what) { throw InvalidArgument(std::string("QpProblem: ") + what); };
  if (Q.cols() != nh || c.size() != nh) bad("head objective shape");
  if (A.cols() != nh || A.rows() != b.size()) bad("head equality shape");
  if (C.cols() != nh || C.rows() != d.size()) bad("head inequality shape");
  if (!Q.allFinite() || !c.allFinite() || !A.allFinite() || !b.allFinite() ||
      !C.allFinite() || !d.allFinite()) {
    bad("non-finite head data");
  }
  for (const auto& k : blocks) {
    const Index n = k.dim();
    if (k.Q.cols() != n || k.c.size() != n) bad("block objective shape");
    if (k.A_own.cols() != n || k.A_head.cols() != nh || k.A_own.rows() != k.A_head.rows() ||
        k.A_own.rows() != k.b.size()) {
      bad("block equality shape");
    }
    if (k.C_own.cols() != n || k.C_head.cols() != nh || k.C_own.rows() != k.C_head.rows() ||
        k.C_own.rows() != k.d.size()) {
      bad("block inequality shape");
    }
    if (!k.Q.allFinite() || !k.c.allFinite() || !k.A_own.allFinite() ||
        !k.A_head.allFinite() || !k.b.allFinite() || !k.C_own.allFinite() ||
        !k.C_head.allFinite() || !k.d.allFinite()) {
      bad("non-finite block data");
    }
  }
}

namespace {

/// Offsets of each block inside the flat x, y and z vectors.
struct Layout {
  Index nh = 0, m0 = 0, p0 = 0;
  std::vector<Index> xo, yo, zo;
  Index n = 0, m = 0, p = 0;

  explicit Layout(const QpProblem& pr) {
    nh = pr.head_dim();
    m0 = pr.A.rows();
    p0 = pr.C.rows();
    n = nh;
    m = m0;
    p = p0;
    for (const auto& k : pr.blocks) {
      xo.push_back(n);
      yo.push_back(m);
      zo.push_back(p);
      n += k.dim();
      m += k.A_own.rows();
      p += k.C_own.rows();
    }
  }
};

VectorXd mul_q(const QpProblem& pr, const Layout& L, const VectorXd& x) {
  VectorXd out(L.n);
  out.head(L.nh) = pr.Q * x.head(L.nh);
  for (std::size_t k = 0; k < pr.blocks.size(); ++k) {
    const auto& B = pr.blocks[k];
    out.segment(L.xo[k], B.dim()) = B.Q * x.segment(L.xo[k], B.dim());
  }
  return out;
}

VectorXd mul_a(const QpProblem& pr, const Layout& L, const VectorXd& x) {
  VectorXd out(L.m);
  const auto xh = x.head(L.nh);
  out.head(L.m0) = pr.A * xh;
  for (std::size_t k = 0; k < pr.blocks.size(); ++k) {
    const auto& B = pr.blocks[k];
    out.segment(L.yo[k], B.A_own.rows()) =
        B.A_head * xh + B.A_own * x.segment(L.xo[k], B.dim());
  }
  return out;
}

VectorXd mul_at(const QpProblem& pr, const Layout& L, const VectorXd& y) {
  VectorXd out(L.n);
  out.head(L.nh) = pr.A.transpose() * y.head(L.m0);
  for (std::size_t k = 0; k < pr.blocks.size(); ++k) {
    const auto& B = pr.blocks[k];
    const auto yk = y.segment(L.yo[k], B.A_own.rows());
    out.head(L.nh) += B.A_head.transpose() * yk;
    out.segment(L.xo[k], B.dim()) = B.A_own.transpose() * yk;
  }
  return out;
}

VectorXd mul_c(const QpProblem& pr, const Layout& L, const VectorXd& x) {
  VectorXd out(L.p);
  const auto xh = x.head(L.nh);
  out.head(L.p0) = pr.C * xh;
  for (std::size_t k = 0; k < pr.blocks.size(); ++k) {
    const auto& B = pr.blocks[k];
    out.segment(L.zo[k], B.C_own.rows()) =
        B.C_head * xh + B.C_own * x.segment(L.xo[k], B.dim());
  }
  return out;
}

VectorXd mul_ct(const QpProblem& pr, const Layout& L, const VectorXd& z) {
  VectorXd out(L.n);
  out.head(L.nh) = pr.C.transpose() * z.head(L.p0);
  for (std::size_t k = 0; k < pr.blocks.size(); ++k) {
    const auto& B = pr.blocks[k];
    const auto zk = z.segment(L.zo[k], B.C_own.rows());
    out.head(L.nh) += B.C_head.transpose() * zk;
    out.segment(L.xo[k], B.dim()) = B.C_own.transpose() * zk;
  }
  return out;
}

VectorXd stack_b(const QpProblem& pr, const Layout& L) {
  VectorXd out(L.m);
  out.head(L.m0) = pr.b;
  for (std::size_t k = 0; k < pr.blocks.size(); ++k) {
    out.segment(L.yo[k], pr.blocks[k].b.size()) = pr.blocks[k].b;
  }
  return out;
}

VectorXd stack_c(const QpProblem& pr, const Layout& L) {
  VectorXd out(L.n);
  out.head(L.nh) = pr.c;
  for (std::size_t k = 0; k < pr.blocks.size(); ++k) {
    out.segment(L.xo[k], pr.blocks[k].dim()) = pr.blocks[k].c;
  }
  return out;
}

VectorXd stack_d(const QpProblem& pr, const Layout& L) {
  VectorXd out(L.p);
  out.head(L.p0) = pr.d;
  for (std::size_t k = 0; k < pr.blocks.size(); ++k) {
    out.segment(L.zo[k], pr.blocks[k].d.size()) = pr.blocks[k].d;
  }
  return out;
}

/// Cholesky that survives the extreme scaling of late interior-point
/// iterations: on failure the diagonal is shifted by a growing multiple of its
/// largest entry.
void robust_llt(Eigen::LLT<MatrixXd>& llt, const MatrixXd& M, const char* what) {
  llt.compute(M);
  if (llt.info() == Eigen::Success) return;
  const double top = M.diagonal().cwiseAbs().maxCoeff();
  for (double rel = 1e-15; rel <= 1e-9; rel *= 10.0) {
    MatrixXd S = M;
    S.diagonal().array() += rel * top;
    llt.compute(S);
    if (llt.info() == Eigen::Success) return;
  }
  throw NumericalError(std::string("solve_qp: ") + what + " is not positive definite");
}

/// Newton system of one interior-point iteration,
///   Q dx + A^T dy + C^T dz = -rd,   A dx - delta dy = -rp,   C dx - W^-1 dz = -W^-1 corr.
/// Simple bounds (a block row with one nonzero and no head part) are folded
/// into the block Hessian. Every other inequality row stays in the system
/// with -1/w on its diagonal, so strongly active rows (w -> inf) never add
/// huge terms that later cancel.
class ReducedKkt {
 public:
  ReducedKkt(const QpProblem& pr, const Layout& L, double rho, double delta)
      : pr_(pr), L_(L), rho_(rho), delta_(delta), blocks_(pr.blocks.size()) {
    for (std::size_t k = 0; k < pr.blocks.size(); ++k) {
      const QpBlock& B = pr.blocks[k];
      BlockFactor& F = blocks_[k];
      for (Index r = 0; r < B.C_own.rows(); ++r) {
        Index nz = 0, col = -1;
        for (Index c = 0; c < B.C_own.cols(); ++c) {
          if (B.C_own(r, c) != 0.0) {
            ++nz;
            col = c;
          }
        }
        if (nz == 1 && B.C_head.row(r).isZero(0.0)) {
          F.bound_rows.push_back(r);
          F.bound_cols.push_back(col);
        } else {
          F.aug_rows.push_back(r);
        }
      }
      const Index mk = B.A_own.rows();
      const auto na = static_cast<Index>(F.aug_rows.size());
      F.A_hat.resize(mk + na, B.dim());
      F.E_hat.resize(mk + na, L.nh);
      F.A_hat.topRows(mk) = B.A_own;
      F.E_hat.topRows(mk) = B.A_head;
      for (Index i = 0; i < na; ++i) {
        F.A_hat.row(mk + i) = B.C_own.row(F.aug_rows[static_cast<std::size_t>(i)]);
        F.E_hat.row(mk + i) = B.C_head.row(F.aug_rows[static_cast<std::size_t>(i)]);
      }
    }
  }

  void factor(const VectorXd& w) {
    const Index nh = L_.nh;
    MatrixXd H = pr_.Q;
    H.diagonal().array() += rho_;

    for (std::size_t k = 0; k < pr_.blocks.size(); ++k) {
      const QpBlock& B = pr_.blocks[k];
      BlockFactor& F = blocks_[k];
      const Index nk = B.dim();
      const Index mk = B.A_own.rows();
      const Index zo = L_.zo[k];

      MatrixXd M = B.Q;
      M.diagonal().array() += rho_;
      for (std::size_t i = 0; i < F.bound_rows.size(); ++i) {
        const double a = B.C_own(F.bound_rows[i], F.bound_cols[i]);
        M(F.bound_cols[i], F.bound_cols[i]) += w(zo + F.bound_rows[i]) * a * a;
      }
      robust_llt(F.m_llt, M, "block Hessian");

      const Index mh = F.A_hat.rows();
      F.delta.resize(mh);
      F.delta.head(mk).setConstant(delta_);
      for (std::size_t i = 0; i < F.aug_rows.size(); ++i) {
        F.delta(mk + static_cast<Index>(i)) = 1.0 / w(zo + F.aug_rows[i]);
      }
      F.minv_at = F.m_llt.solve(F.A_hat.transpose());
      if (mh > 0) {
        MatrixXd S = F.A_hat * F.minv_at;
        S.diagonal() += F.delta;
        robust_llt(F.s_llt, S, "block Schur complement");
      }
      MatrixXd E = MatrixXd::Zero(nk + mh, nh);
      E.bottomRows(mh) = F.E_hat;
      F.kinv_e = block_solve(k, E);
      H -= E.transpose() * F.kinv_e;
    }

    const Index m0 = L_.m0;
    const Index p0 = L_.p0;
    MatrixXd Kh = MatrixXd::Zero(nh + m0 + p0, nh + m0 + p0);
    Kh.topLeftCorner(nh, nh) = 0.5 * (H + H.transpose());
    if (m0 > 0) {
      Kh.block(0, nh, nh, m0) = pr_.A.transpose();
      Kh.block(nh, 0, m0, nh) = pr_.A;
      Kh.block(nh, nh, m0, m0).diagonal().setConstant(-delta_);
    }
    if (p0 > 0) {
      Kh.block(0, nh + m0, nh, p0) = pr_.C.transpose();
      Kh.block(nh + m0, 0, p0, nh) = pr_.C;
      Kh.block(nh + m0, nh + m0, p0, p0).diagonal() = -w.head(p0).cwiseInverse();
    }
    head_lu_.compute(Kh);
  }

  /// Solves for (dx, dy, dz) given rd, rp and corr (all full length).
  void solve(const VectorXd& w, const VectorXd& rd, const VectorXd& rp, const VectorXd& corr,
             VectorXd& dx, VectorXd& dy, VectorXd& dz) const {
    const Index nh = L_.nh;
    const Index m0 = L_.m0;
    const Index p0 = L_.p0;
    VectorXd rh(nh + m0 + p0);
    rh.head(nh) = -rd.head(nh);
    rh.segment(nh, m0) = -rp.head(m0);
    rh.tail(p0) = -corr.head(p0).cwiseQuotient(w.head(p0));

    std::vector<VectorXd> t(pr_.blocks.size());
    for (std::size_t k = 0; k < pr_.blocks.size(); ++k) {
      const QpBlock& B = pr_.blocks[k];
      const BlockFactor& F = blocks_[k];
      const Index nk = B.dim();
      const Index mk = B.A_own.rows();
      const Index zo = L_.zo[k];
      VectorXd rk(nk + F.A_hat.rows());
      rk.head(nk) = -rd.segment(L_.xo[k], nk);
      for (std::size_t i = 0; i < F.bound_rows.size(); ++i) {
        rk(F.bound_cols[i]) -= B.C_own(F.bound_rows[i], F.bound_cols[i]) * corr(zo + F.bound_rows[i]);
      }
      rk.segment(nk, mk) = -rp.segment(L_.yo[k], mk);
      for (std::size_t i = 0; i < F.aug_rows.size(); ++i) {
        const Index r = zo + F.aug_rows[i];
        rk(nk + mk + static_cast<Index>(i)) = -corr(r) / w(r);
      }
      t[k] = block_solve(k, rk);
      rh.head(nh) -= F.E_hat.transpose() * t[k].tail(F.A_hat.rows());
    }
    const VectorXd sol = head_lu_.solve(rh);
    if (!sol.allFinite()) throw NumericalError("solve_qp: head system is singular");

    dx.resize(L_.n);
    dy.resize(L_.m);
    dz.resize(L_.p);
    dx.head(nh) = sol.head(nh);
    dy.head(m0) = sol.segment(nh, m0);
    dz.head(p0) = sol.tail(p0);
    for (std::size_t k = 0; k < pr_.blocks.size(); ++k) {
      const QpBlock& B = pr_.blocks[k];
      const BlockFactor& F = blocks_[k];
      const Index nk = B.dim();
      const Index mk = B.A_own.rows();
      const Index zo = L_.zo[k];
      const VectorXd s = t[k] - F.kinv_e * dx.head(nh);
      const auto dxk = s.head(nk);
      dx.segment(L_.xo[k], nk) = dxk;
      dy.segment(L_.yo[k], mk) = s.segment(nk, mk);
      for (std::size_t i = 0; i < F.aug_rows.size(); ++i) {
        dz(zo + F.aug_rows[i]) = s(nk + mk + static_cast<Index>(i));
      }
      for (std::size_t i = 0; i < F.bound_rows.size(); ++i) {
        const Index r = zo + F.bound_rows[i];
        dz(r) = w(r) * B.C_own(F.bound_rows[i], F.bound_cols[i]) * dxk(F.bound_cols[i]) + corr(r);
      }
    }
  }

 private:
  struct BlockFactor {
    std::vector<Index> bound_rows, bound_cols, aug_rows;
    MatrixXd A_hat;  ///< equality rows, then augmented inequality rows
    MatrixXd E_hat;  ///< their head parts
    VectorXd delta;  ///< regularization (equalities) and 1/w (inequalities)
    Eigen::LLT<MatrixXd> m_llt;
    Eigen::LLT<MatrixXd> s_llt;
    MatrixXd minv_at;
    MatrixXd kinv_e;
  };

  // [M A^T; A -Delta]^-1 R through the Schur complement A M^-1 A^T + Delta.
  MatrixXd block_solve(std::size_t k, const MatrixXd& R) const {
    const BlockFactor& F = blocks_[k];
    const Index nk = pr_.blocks[k].dim();
    const Index mh = F.A_hat.rows();
    const MatrixXd minv_r1 = F.m_llt.solve(R.topRows(nk));
    if (mh == 0) return minv_r1;
    MatrixXd out(nk + mh, R.cols());
    const MatrixXd yb = F.s_llt.solve(F.A_hat * minv_r1 - R.bottomRows(mh));
    out.topRows(nk) = minv_r1 - F.minv_at * yb;
    out.bottomRows(mh) = yb;
    return out;
  }

  const QpProblem& pr_;
  const Layout& L_;
  double rho_;
  double delta_;
  std::vector<BlockFactor> blocks_;
  Eigen::PartialPivLU<MatrixXd> head_lu_;
};

double max_step(const VectorXd& v, const VectorXd& dv) {
  double a = 1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  }
  return a;
}

double inf_norm(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct Residuals {
  VectorXd rd, rp, ri;
  double mu = 0.0;
};

Residuals residuals(const QpProblem& pr, const Layout& L, const VectorXd& cvec,
                    const VectorXd& bvec, const VectorXd& dvec, const VectorXd& x,
                    const VectorXd& y, const VectorXd& z, const VectorXd& s) {
  Residuals r;
  r.rd = mul_q(pr, L, x) + cvec + mul_at(pr, L, y) + mul_ct(pr, L, z);
  r.rp = mul_a(pr, L, x) - bvec;
  r.ri = mul_c(pr, L, x) + s - dvec;
  r.mu = L.p > 0 ? s.dot(z) / static_cast<double>(L.p) : 0.0;
  return r;
}

QpResult unpack(const QpProblem& pr, const Layout& L, const VectorXd& x) {
  QpResult res;
  res.x_head = x.head(L.nh);
  for (std::size_t k = 0; k < pr.blocks.size(); ++k) {
    res.x_blocks.push_back(x.segment(L.xo[k], pr.blocks[k].dim()));
  }
  return res;
}

QpResult interior_point(const QpProblem& pr, const QpSettings& st) {
  const Layout L(pr);
  const VectorXd cvec = stack_c(pr, L);
  const VectorXd bvec = stack_b(pr, L);
  const VectorXd dvec = stack_d(pr, L);

  VectorXd x = VectorXd::Zero(L.n);
  VectorXd y = VectorXd::Zero(L.m);
  VectorXd s = (dvec - mul_c(pr, L, x)).cwiseMax(1.0);
  VectorXd z = VectorXd::Ones(L.p);

  const double scale_c = 1.0 + inf_norm(cvec);
  const double scale_b = 1.0 + inf_norm(bvec);
  const double scale_d = 1.0 + inf_norm(dvec);

  ReducedKkt kkt(pr, L, st.reg_primal, st.reg_dual);
  QpStatus status = QpStatus::max_iter;
  int it = 0;
  Residuals r;
  double kkt_res = std::numeric_limits<double>::infinity();

  for (; it <= st.max_iter; ++it) {
    r = residuals(pr, L, cvec, bvec, dvec, x, y, z, s);
    const double e_d = inf_norm(r.rd) / (scale_c + inf_norm(mul_q(pr, L, x)));
    const double e_p = inf_norm(r.rp) / scale_b;
    const double e_i = inf_norm(r.ri) / scale_d;
    kkt_res = std::max({e_d, e_p, e_i, r.mu});
    if (!std::isfinite(kkt_res)) break;
    if (kkt_res <= st.tol) {
      status = QpStatus::optimal;
      break;
    }
    if (it == st.max_iter) break;
    if (inf_norm(x) > 1e12 || inf_norm(z) > 1e14) break;

    const VectorXd w = z.cwiseQuotient(s);
    try {
      kkt.factor(w);
    } catch (const NumericalError&) {
      break;
    }

    VectorXd dx, dy;
    auto direction = [&](const VectorXd& rc, VectorXd& ds, VectorXd& dz) {
      const VectorXd corr = (z.cwiseProduct(r.ri) - rc).cwiseQuotient(s);
      kkt.solve(w, r.rd, r.rp, corr, dx, dy, dz);
      // Iterative refinement against the unregularized Newton equations.
      auto newton_residual = [&](VectorXd& e1, VectorXd& e2, VectorXd& e3) {
        e1 = r.rd + mul_q(pr, L, dx) + mul_at(pr, L, dy) + mul_ct(pr, L, dz);
        e2 = r.rp + mul_a(pr, L, dx);
        e3 = corr + w.cwiseProduct(mul_c(pr, L, dx)) - dz;
        return std::max({inf_norm(e1), inf_norm(e2), inf_norm(e3.cwiseQuotient(w))});
      };
      VectorXd e1, e2, e3, cx, cy, cz;
      double err = newton_residual(e1, e2, e3);
      for (int pass = 0; pass < 3 && err > 0.0; ++pass) {
        kkt.solve(w, e1, e2, e3, cx, cy, cz);
        const VectorXd px = dx, py = dy, pz = dz;
        dx += cx;
        dy += cy;
        dz += cz;
        const double next = newton_residual(e1, e2, e3);
        if (!(next < 0.5 * err)) {
          dx = px;
          dy = py;
          dz = pz;
          break;
        }
        err = next;
      }
      ds = -r.ri - mul_c(pr, L, dx);
    };

    VectorXd ds, dz;
    try {
      if (L.p == 0) {
        direction(VectorXd(), ds, dz);
        x += dx;
        y += dy;
        continue;
      }
      direction(s.cwiseProduct(z), ds, dz);
      const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
      const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(L.p);
      const double sigma = std::pow(std::clamp(mu_aff / r.mu, 0.0, 1.0), 3);
      const VectorXd rc = s.cwiseProduct(z) + ds.cwiseProduct(dz) -
                          VectorXd::Constant(L.p, sigma * r.mu);
      direction(rc, ds, dz);
    } catch (const NumericalError&) {
      break;
    }
    if (!dx.allFinite() || !dz.allFinite()) break;
    const double a = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
    x += a * dx;
    y += a * dy;
    s += a * ds;
    z += a * dz;
  }

  QpResult res = unpack(pr, L, x);
  res.status = status;
  res.y = y;
  res.z = z;
  res.iterations = it;
  res.kkt_residual = kkt_res;
  res.objective = 0.5 * x.dot(mul_q(pr, L, x)) + cvec.dot(x);
  return res;
}

/// min t s.t. A x = b, C x - t <= d, t >= -1 with a small proximal term on x.
QpProblem phase_one(const QpProblem& pr) {
  constexpr double kProx = 1e-10;
  const Index nh = pr.head_dim();
  QpProblem p1;
  p1.Q = MatrixXd::Zero(nh + 1, nh + 1);
  p1.Q.topLeftCorner(nh, nh).diagonal().setConstant(kProx);
  p1.c = VectorXd::Zero(nh + 1);
  p1.c(nh) = 1.0;
  p1.A = MatrixXd::Zero(pr.A.rows(), nh + 1);
  p1.A.leftCols(nh) = pr.A;
  p1.b = pr.b;
  p1.C = MatrixXd::Zero(pr.C.rows() + 1, nh + 1);
  p1.C.topLeftCorner(pr.C.rows(), nh) = pr.C;
  p1.C.col(nh).head(pr.C.rows()).setConstant(-1.0);
  p1.C(pr.C.rows(), nh) = -1.0;
  p1.d = VectorXd(pr.d.size() + 1);
  p1.d << pr.d, 1.0;
  for (const QpBlock& B : pr.blocks) {
    QpBlock b1;
    b1.Q = MatrixXd::Identity(B.dim(), B.dim()) * kProx;
    b1.c = VectorXd::Zero(B.dim());
    b1.A_head = MatrixXd::Zero(B.A_head.rows(), nh + 1);
    b1.A_head.leftCols(nh) = B.A_head;
    b1.A_own = B.A_own;
    b1.b = B.b;
    b1.C_head = MatrixXd::Zero(B.C_head.rows(), nh + 1);
    b1.C_head.leftCols(nh) = B.C_head;
    b1.C_head.col(nh).setConstant(-1.0);
    b1.C_own = B.C_own;
    b1.d = B.d;
    p1.blocks.push_back(std::move(b1));
  }
  return p1;
}

}  // namespace

QpResult solve_qp(const QpProblem& prob, const QpSettings& settings) {
  prob.validate();
  QpResult res = interior_point(prob, settings);
  if (res.status == QpStatus::optimal || !settings.detect_infeasibility ||
      prob.total_ineq() == 0) {
    return res;
  }
  QpSettings s1 = settings;
  s1.detect_infeasibility = false;
  s1.tol = std::max(settings.tol, 1e-9);
  const QpResult p1 = interior_point(phase_one(prob), s1);
  const double t = p1.x_head(prob.head_dim());
  res.phase1_value = t;
  double d_scale = 1.0 + (prob.d.size() ? prob.d.cwiseAbs().maxCoeff() : 0.0);
  for (const QpBlock& b : prob.blocks) {
    if (b.d.size()) d_scale = std::max(d_scale, 1.0 + b.d.cwiseAbs().maxCoeff());
  }
  if (p1.status == QpStatus::optimal && t > 1e-7 * d_scale) {
    res.status = QpStatus::infeasible;
  }
  return res;
}

}  // namespace rcbf
