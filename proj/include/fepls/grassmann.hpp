#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "fepls/errors.hpp"
#include "fepls/lbfgs.hpp"
#include "fepls/linalg.hpp"

namespace fepls {

// ---------------------------------------------------------------------------
// Objective over subspaces:  J(G) = log|G'MG| + log|G'VG|  for semiorthogonal
// G (p x u). The minimization is carried out through the unnormalized
// parameterization G = C (C'C)^{-1/2} where C has an identity block in u
// pivot rows and free rows A elsewhere; then
//   J = log|C'MC| + log|C'VC| - 2 log|C'C|,
// and each free row can be optimized in closed quadratic-form coordinates.
// ---------------------------------------------------------------------------

// Extra smooth objective term depending on Gamma = C (C'C)^{-1/2} (the GLM
// deviance in the logistic envelope). `row` is a row index of C in original
// ordering; the gradient is with respect to that row's entries.
class GammaTermBase {
 public:
  virtual ~GammaTermBase() = default;
  virtual double value(const Eigen::MatrixXd& C) const = 0;
  virtual double value_and_row_grad(const Eigen::MatrixXd& C, int row,
                                    Eigen::VectorXd& grad) const = 0;
};

// J(G) for semiorthogonal G; +infinity when an inner matrix is numerically
// singular (infeasible point sentinel).
inline double semiorth_objective(const Eigen::MatrixXd& G, const Eigen::MatrixXd& M,
                                 const Eigen::MatrixXd& V) {
  if (G.cols() == 0) return 0.0;
  auto lm = try_logdet_spd(sym(G.transpose() * M * G));
  auto lv = try_logdet_spd(sym(G.transpose() * V * G));
  if (!lm || !lv) return std::numeric_limits<double>::infinity();
  return *lm + *lv;
}

// Same objective through the unnormalized parameterization C.
inline double unnormalized_objective(const Eigen::MatrixXd& C, const Eigen::MatrixXd& M,
                                     const Eigen::MatrixXd& V) {
  auto lm = try_logdet_spd(sym(C.transpose() * M * C));
  auto lv = try_logdet_spd(sym(C.transpose() * V * C));
  auto lk = try_logdet_spd(sym(C.transpose() * C));
  if (!lm || !lv || !lk) return std::numeric_limits<double>::infinity();
  return *lm + *lv - 2.0 * *lk;
}

// Frozen per-row subproblem: everything except the optimized row, which has
// been symmetrically permuted to the LAST position so the corner elements
// M22, V22 are scalars. With q = a + qm0, qv = a + qv0,
//   F(a) = F1 + log(1 + M22 q'W1^{-1}q) + log(1 + V22 qv'W2^{-1}qv)
//             - 2 log(1 + a'K1^{-1}a)   [+ extra term at the assembled C].
struct RowContext {
  int p = 0, u = 0;
  Eigen::MatrixXd A1;   // remaining free rows, (p-u-1) x u
  Eigen::MatrixXd W1;   // u x u SPD, C1'(M11 - m12 m12'/M22)C1
  Eigen::MatrixXd W2;   // u x u SPD, V analogue
  Eigen::MatrixXd K1;   // u x u SPD, I + A1'A1
  Eigen::VectorXd qm0;  // C1'm12 / M22
  Eigen::VectorXd qv0;  // C1'v12 / V22
  double M22 = 0.0, V22 = 0.0;
  double F1 = 0.0;      // log|W1| + log|W2| - 2 log|K1|

  Eigen::LLT<Eigen::MatrixXd> W1llt, W2llt, K1llt;

  // assembly data (original row ordering) for the extra term
  std::vector<int> identity_rows;  // u pivot rows carrying I_u
  std::vector<int> other_rows;     // free rows frozen at A1
  int target_row = -1;             // the row being optimized
  const GammaTermBase* extra = nullptr;

  // C in original row order with candidate row a.
  Eigen::MatrixXd assemble(const Eigen::VectorXd& a) const {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p, u);
    for (int i = 0; i < u; ++i) C(identity_rows[i], i) = 1.0;
    for (std::size_t k = 0; k < other_rows.size(); ++k)
      C.row(other_rows[k]) = A1.row(static_cast<Eigen::Index>(k));
    C.row(target_row) = a.transpose();
    return C;
  }
};

// Build the frozen context for one free row. M and V are p x p SPD in the
// ORIGINAL ordering; the identity rows and frozen free rows are given by
// index, the target row is permuted last implicitly.
inline RowContext build_row_context(const Eigen::MatrixXd& M, const Eigen::MatrixXd& V,
                                    const std::vector<int>& identity_rows,
                                    const std::vector<int>& other_rows,
                                    int target_row, const Eigen::MatrixXd& A1,
                                    const GammaTermBase* extra = nullptr) {
  RowContext ctx;
  ctx.p = static_cast<int>(M.rows());
  ctx.u = static_cast<int>(identity_rows.size());
  ctx.A1 = A1;
  ctx.identity_rows = identity_rows;
  ctx.other_rows = other_rows;
  ctx.target_row = target_row;
  ctx.extra = extra;

  const int p = ctx.p, u = ctx.u;
  const int q = p - 1;  // rows other than the target
  std::vector<int> ord;
  ord.reserve(q);
  for (int r : identity_rows) ord.push_back(r);
  for (int r : other_rows) ord.push_back(r);

  // permuted blocks: M11 (q x q), m12 (q), M22 scalar; same for V
  Eigen::MatrixXd M11(q, q), V11(q, q);
  Eigen::VectorXd m12(q), v12(q);
  for (int i = 0; i < q; ++i) {
    m12(i) = M(ord[i], target_row);
    v12(i) = V(ord[i], target_row);
    for (int j = 0; j < q; ++j) {
      M11(i, j) = M(ord[i], ord[j]);
      V11(i, j) = V(ord[i], ord[j]);
    }
  }
  ctx.M22 = M(target_row, target_row);
  ctx.V22 = V(target_row, target_row);
  if (!(ctx.M22 > 0.0) || !(ctx.V22 > 0.0))
    throw NumericalError("row context: nonpositive diagonal in SPD input");

  // C1 = [I_u; A1]: products via the block structure
  auto c1t_vec = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out = v.head(u);
    if (A1.rows() > 0) out += A1.transpose() * v.tail(q - u);
    return out;
  };
  auto c1t_mat_c1 = [&](const Eigen::MatrixXd& B) {
    // C1' B C1 with C1 = [I; A1]
    Eigen::MatrixXd Btl = B.topLeftCorner(u, u);
    if (A1.rows() == 0) return Eigen::MatrixXd(sym(Btl));
    Eigen::MatrixXd Btr = B.topRightCorner(u, q - u);
    Eigen::MatrixXd Bbr = B.bottomRightCorner(q - u, q - u);
    Eigen::MatrixXd out = Btl + Btr * A1 + A1.transpose() * Btr.transpose() +
                          A1.transpose() * Bbr * A1;
    return Eigen::MatrixXd(sym(out));
  };

  Eigen::VectorXd bm = c1t_vec(m12), bv = c1t_vec(v12);
  ctx.W1 = c1t_mat_c1(M11) - bm * bm.transpose() / ctx.M22;
  ctx.W2 = c1t_mat_c1(V11) - bv * bv.transpose() / ctx.V22;
  ctx.K1 = Eigen::MatrixXd::Identity(u, u);
  if (A1.rows() > 0) ctx.K1 += A1.transpose() * A1;
  ctx.qm0 = bm / ctx.M22;
  ctx.qv0 = bv / ctx.V22;

  ctx.W1llt.compute(sym(ctx.W1));
  ctx.W2llt.compute(sym(ctx.W2));
  ctx.K1llt.compute(sym(ctx.K1));
  if (ctx.W1llt.info() != Eigen::Success || ctx.W2llt.info() != Eigen::Success ||
      ctx.K1llt.info() != Eigen::Success)
    throw NumericalError("row context: reduced quadratic form is not positive definite");

  auto ld = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < llt.matrixLLT().rows(); ++i)
      s += std::log(llt.matrixLLT()(i, i));
    return 2.0 * s;
  };
  ctx.F1 = ld(ctx.W1llt) + ld(ctx.W2llt) - 2.0 * ld(ctx.K1llt);
  return ctx;
}

// F(a): equals the full objective (penalty + extra term) of the assembled C.
inline double row_objective(const Eigen::VectorXd& a, const RowContext& ctx) {
  Eigen::VectorXd q = a + ctx.qm0;
  Eigen::VectorXd qv = a + ctx.qv0;
  double tm = ctx.M22 * q.dot(ctx.W1llt.solve(q));
  double tv = ctx.V22 * qv.dot(ctx.W2llt.solve(qv));
  double tk = a.dot(ctx.K1llt.solve(a));
  double f = ctx.F1 + std::log1p(tm) + std::log1p(tv) - 2.0 * std::log1p(tk);
  if (ctx.extra) f += ctx.extra->value(ctx.assemble(a));
  return f;
}

inline Eigen::VectorXd row_gradient(const Eigen::VectorXd& a, const RowContext& ctx) {
  Eigen::VectorXd q = a + ctx.qm0;
  Eigen::VectorXd qv = a + ctx.qv0;
  Eigen::VectorXd wm = ctx.W1llt.solve(q);
  Eigen::VectorXd wv = ctx.W2llt.solve(qv);
  Eigen::VectorXd wk = ctx.K1llt.solve(a);
  double dm = 1.0 + ctx.M22 * q.dot(wm);
  double dv = 1.0 + ctx.V22 * qv.dot(wv);
  double dk = 1.0 + a.dot(wk);
  Eigen::VectorXd g =
      (2.0 * ctx.M22 / dm) * wm + (2.0 * ctx.V22 / dv) * wv - (4.0 / dk) * wk;
  if (ctx.extra) {
    Eigen::VectorXd ge(ctx.u);
    ctx.extra->value_and_row_grad(ctx.assemble(a), ctx.target_row, ge);
    g += ge;
  }
  return g;
}

struct AlternatingOptions {
  double outer_rel_tol = 1e-8;
  int max_sweeps = 200;
  LbfgsOptions inner{};  // defaults: 50 iterations, gradient tol 1e-9
  double mono_slack = 1e-10;
};

struct AlternatingResult {
  Eigen::MatrixXd Gamma;  // p x u semiorthogonal
  double fval = std::numeric_limits<double>::infinity();
  int sweeps = 0;
  bool converged = false;
  int mono_violations = 0;     // row/f updates that increased the objective
  double worst_violation = 0.0;
};

namespace detail {

// Choose u well-conditioned pivot rows of G (column-pivoted QR of G').
inline std::vector<int> pivot_rows(const Eigen::MatrixXd& G) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(G.transpose());
  const auto& perm = qr.colsPermutation().indices();
  std::vector<int> rows(G.cols());
  for (int i = 0; i < G.cols(); ++i) rows[i] = perm(i);
  std::sort(rows.begin(), rows.end());
  return rows;
}

inline Eigen::MatrixXd assemble_C(int p, const std::vector<int>& idI,
                                  const std::vector<int>& freeR,
                                  const Eigen::MatrixXd& A) {
  const int u = static_cast<int>(idI.size());
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p, u);
  for (int i = 0; i < u; ++i) C(idI[i], i) = 1.0;
  for (std::size_t k = 0; k < freeR.size(); ++k)
    C.row(freeR[k]) = A.row(static_cast<Eigen::Index>(k));
  return C;
}

}  // namespace detail

// Coordinate descent over the free rows of the C parameterization; one full
// sweep of rows per outer iteration, each row solved by L-BFGS with the
// analytic gradient. The objective value is tracked across every accepted
// update and must never increase (violations are counted, not hidden).
inline AlternatingResult alternating_minimize(const Eigen::MatrixXd& M,
                                              const Eigen::MatrixXd& V, int u,
                                              const Eigen::MatrixXd& G_init,
                                              const GammaTermBase* extra = nullptr,
                                              const AlternatingOptions& opts = {}) {
  const int p = static_cast<int>(M.rows());
  if (u < 1 || u > p) throw InvalidArgument("alternating_minimize: u out of range");

  AlternatingResult res;
  if (u == p) {
    res.Gamma = Eigen::MatrixXd::Identity(p, p);
    res.fval = semiorth_objective(res.Gamma, M, V) +
               (extra ? extra->value(res.Gamma) : 0.0);
    res.converged = true;
    return res;
  }

  // pivot rows -> identity block; remaining rows -> A
  std::vector<int> idI = detail::pivot_rows(G_init);
  std::vector<int> freeR;
  for (int r = 0; r < p; ++r)
    if (std::find(idI.begin(), idI.end(), r) == idI.end()) freeR.push_back(r);

  Eigen::MatrixXd B(u, u);
  for (int i = 0; i < u; ++i) B.row(i) = G_init.row(idI[i]);
  Eigen::MatrixXd A(p - u, u);
  for (std::size_t k = 0; k < freeR.size(); ++k)
    A.row(static_cast<Eigen::Index>(k)) =
        G_init.row(freeR[k]) * B.inverse();

  Eigen::MatrixXd C = detail::assemble_C(p, idI, freeR, A);
  double F = unnormalized_objective(C, M, V) + (extra ? extra->value(C) : 0.0);
  if (!std::isfinite(F))
    throw NumericalError("alternating_minimize: infeasible starting point");

  const int nfree = p - u;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double F_before = F;
    for (int k = 0; k < nfree; ++k) {
      std::vector<int> others;
      others.reserve(nfree - 1);
      Eigen::MatrixXd A1(nfree - 1, u);
      int r = 0;
      for (int j = 0; j < nfree; ++j) {
        if (j == k) continue;
        others.push_back(freeR[j]);
        A1.row(r++) = A.row(j);
      }
      RowContext ctx = build_row_context(M, V, idI, others, freeR[k], A1, extra);
      auto fg = [&](const Eigen::VectorXd& a, Eigen::VectorXd& grad) {
        grad = row_gradient(a, ctx);
        return row_objective(a, ctx);
      };
      LbfgsResult inner = lbfgs_minimize(fg, A.row(k).transpose(), opts.inner);
      if (inner.f <= F + opts.mono_slack) {
        if (inner.f > F) {
          // within slack but not an improvement: keep the old row
        } else {
          A.row(k) = inner.x.transpose();
          F = inner.f;
        }
      } else {
        ++res.mono_violations;
        res.worst_violation = std::max(res.worst_violation, inner.f - F);
      }
    }
    res.sweeps = sweep + 1;
    if (std::abs(F_before - F) <= opts.outer_rel_tol * (1.0 + std::abs(F))) {
      res.converged = true;
      break;
    }
    // re-pivot if the free rows drift to extreme magnitudes
    if (A.size() > 0 && A.cwiseAbs().maxCoeff() > 1e8) {
      C = detail::assemble_C(p, idI, freeR, A);
      Eigen::MatrixXd G = C * inv_sqrt_spd(sym(C.transpose() * C));
      idI = detail::pivot_rows(G);
      freeR.clear();
      for (int rr = 0; rr < p; ++rr)
        if (std::find(idI.begin(), idI.end(), rr) == idI.end()) freeR.push_back(rr);
      for (int i = 0; i < u; ++i) B.row(i) = G.row(idI[i]);
      A.resize(p - u, u);
      for (std::size_t kk = 0; kk < freeR.size(); ++kk)
        A.row(static_cast<Eigen::Index>(kk)) = G.row(freeR[kk]) * B.inverse();
    }
  }

  C = detail::assemble_C(p, idI, freeR, A);
  res.Gamma = C * inv_sqrt_spd(sym(C.transpose() * C));
  res.fval = F;
  return res;
}

}  // namespace fepls
