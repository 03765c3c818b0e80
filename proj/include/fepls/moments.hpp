#pragma once

#include <Eigen/Dense>

#include "fepls/errors.hpp"
#include "fepls/linalg.hpp"

namespace fepls {

// Divisor-n second moments of (Xtil, Ytil) plus the conditional covariance
// S_XgY = S_X - S_XY S_Y^{-1} S_XY^T used by the envelope objective.
struct SampleMoments {
  Eigen::MatrixXd SX;    // m_x x m_x
  Eigen::MatrixXd SY;    // m_y x m_y (ridge-stabilized if near singular)
  Eigen::MatrixXd SXY;   // m_x x m_y
  Eigen::MatrixXd SXgY;  // m_x x m_x
  int n = 0;
  bool sy_stabilized = false;

  int m_x() const { return static_cast<int>(SX.rows()); }
  int m_y() const { return static_cast<int>(SY.rows()); }
};

inline SampleMoments sample_moments(const Eigen::MatrixXd& Xtil,
                                    const Eigen::MatrixXd& Ytil) {
  const Eigen::Index n = Xtil.rows();
  if (n < 2) throw InsufficientData("sample_moments: need n >= 2");
  if (Ytil.rows() != n)
    throw InvalidArgument("sample_moments: X and Y row counts differ");

  SampleMoments m;
  m.n = static_cast<int>(n);
  Eigen::RowVectorXd xm = Xtil.colwise().mean();
  Eigen::RowVectorXd ym = Ytil.colwise().mean();
  Eigen::MatrixXd Xc = Xtil.rowwise() - xm;
  Eigen::MatrixXd Yc = Ytil.rowwise() - ym;
  m.SX = sym(Xc.transpose() * Xc / double(n));
  m.SY = sym(Yc.transpose() * Yc / double(n));
  m.SXY = Xc.transpose() * Yc / double(n);

  // Stabilize a numerically singular response covariance before inversion.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.SY);
  double lmax = es.eigenvalues().maxCoeff();
  double lmin = es.eigenvalues().minCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12) {
    double eps = 1e-10 * m.SY.trace() / double(m.SY.rows());
    if (!(eps > 0.0)) eps = 1e-10;
    m.SY.diagonal().array() += eps;
    m.sy_stabilized = true;
  }
  m.SXgY = sym(m.SX - m.SXY * solve_spd(m.SY, m.SXY.transpose()));
  return m;
}

}  // namespace fepls
