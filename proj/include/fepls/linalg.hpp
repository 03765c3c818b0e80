#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "fepls/errors.hpp"

namespace fepls {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd sym(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

// log det of a symmetric positive definite matrix via Cholesky.
// Returns nullopt when the factorization detects indefiniteness.
inline std::optional<double> try_logdet_spd(const MatrixXd& M) {
  if (M.rows() == 0) return 0.0;
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) return std::nullopt;
  double ld = 0.0;
  const auto& L = llt.matrixLLT();
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    double d = L(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    ld += std::log(d);
  }
  return 2.0 * ld;
}

inline double logdet_spd(const MatrixXd& M) {
  auto ld = try_logdet_spd(M);
  if (!ld) throw NumericalError("logdet_spd: matrix is not positive definite");
  return *ld;
}

inline MatrixXd solve_spd(const MatrixXd& A, const MatrixXd& B) {
  Eigen::LLT<MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) return llt.solve(B);
  Eigen::LDLT<MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("solve_spd: factorization failed");
  return ldlt.solve(B);
}

inline MatrixXd inverse_spd(const MatrixXd& A) {
  return solve_spd(A, MatrixXd::Identity(A.rows(), A.cols()));
}

// Condition number from singular values (general rectangular matrix).
inline double cond(const MatrixXd& M) {
  if (M.rows() == 0 || M.cols() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  double smax = svd.singularValues()(0);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

// Moore-Penrose pseudo-inverse of a symmetric matrix with a relative
// eigenvalue cutoff.
inline MatrixXd pinv_sym(const MatrixXd& M, double rel_cutoff = 1e-10) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(M));
  if (es.info() != Eigen::Success)
    throw NumericalError("pinv_sym: eigendecomposition failed");
  const VectorXd& ev = es.eigenvalues();
  double cutoff = rel_cutoff * ev.cwiseAbs().maxCoeff();
  VectorXd inv = VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i)) > cutoff) inv(i) = 1.0 / ev(i);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

// Clip a symmetric matrix to the PSD cone (negative eigenvalues -> 0).
inline MatrixXd clip_psd(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(M));
  VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Symmetric inverse square root of an SPD matrix.
inline MatrixXd inv_sqrt_spd(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(M));
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("inv_sqrt_spd: matrix is not positive definite");
  VectorXd ev = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline MatrixXd sqrt_spd(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(M));
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < 0.0)
    throw NumericalError("sqrt_spd: matrix is not positive semidefinite");
  VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Orthonormal basis of the orthogonal complement of span(G), G p x u
// semiorthogonal; returns p x (p-u).
inline MatrixXd orthonormal_complement(const MatrixXd& G) {
  Eigen::Index p = G.rows(), u = G.cols();
  if (u == 0) return MatrixXd::Identity(p, p);
  if (u == p) return MatrixXd(p, 0);
  Eigen::HouseholderQR<MatrixXd> qr(G);
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(p, p);
  return Q.rightCols(p - u);
}

// Principal angles (radians, descending) between the column spans of A and B.
inline VectorXd principal_angles(const MatrixXd& A, const MatrixXd& B) {
  Eigen::HouseholderQR<MatrixXd> qa(A), qb(B);
  MatrixXd Qa = qa.householderQ() * MatrixXd::Identity(A.rows(), A.cols());
  MatrixXd Qb = qb.householderQ() * MatrixXd::Identity(B.rows(), B.cols());
  Eigen::JacobiSVD<MatrixXd> svd(Qa.transpose() * Qb);
  VectorXd s = svd.singularValues();
  VectorXd ang(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    ang(i) = std::acos(std::clamp(s(i), -1.0, 1.0));
  return ang;  // ascending singular values last -> largest angle last
}

inline double max_principal_angle(const MatrixXd& A, const MatrixXd& B) {
  VectorXd a = principal_angles(A, B);
  return a.size() ? a.maxCoeff() : 0.0;
}

inline MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
  MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

// Solve S T + T S = R for symmetric T, with S SPD and R symmetric,
// by congruence with the eigenbasis of S.
inline MatrixXd lyap_spd(const MatrixXd& S, const MatrixXd& R) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(S));
  if (es.info() != Eigen::Success)
    throw NumericalError("lyap_spd: eigendecomposition failed");
  const MatrixXd& U = es.eigenvectors();
  const VectorXd& lam = es.eigenvalues();
  MatrixXd Rt = U.transpose() * sym(R) * U;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    for (Eigen::Index j = 0; j < lam.size(); ++j)
      Rt(i, j) /= (lam(i) + lam(j));
  return U * Rt * U.transpose();
}

inline bool is_semiorthogonal(const MatrixXd& G, double tol = 1e-8) {
  if (G.cols() == 0) return true;
  MatrixXd E = G.transpose() * G - MatrixXd::Identity(G.cols(), G.cols());
  return E.cwiseAbs().maxCoeff() <= tol;
}

}  // namespace fepls
