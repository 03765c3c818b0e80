#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "fepls/errors.hpp"
#include "fepls/linalg.hpp"
#include "fepls/quadrature.hpp"

namespace fepls {

enum class BasisKind { fourier, natural_spline, tabulated };

inline std::string to_string(BasisKind k) {
  switch (k) {
    case BasisKind::fourier: return "fourier";
    case BasisKind::natural_spline: return "natural-spline";
    case BasisKind::tabulated: return "tabulated";
  }
  return "?";
}

// A finite basis system on [0,1]. The functions exposed by `evaluate` are
// linear combinations (columns of `coef`) of a raw family determined by
// `kind`: the Fourier system, natural cubic splines in truncated-power
// form, or tabulated curves interpolated linearly. Orthonormalization only
// rewrites `coef`, so the span is preserved exactly.
struct BasisSet {
  BasisKind kind = BasisKind::fourier;
  int m = 0;                  // number of exposed functions
  Eigen::VectorXd knots;      // natural_spline only
  Eigen::MatrixXd coef;       // raw-size x m change of coordinates
  bool orthonormalized = false;
  QuadratureRule quad;        // inner-product rule attached to this basis

  Eigen::VectorXd tab_grid;   // tabulated only
  Eigen::MatrixXd tab_values; // len(tab_grid) x raw-size

  int raw_size() const { return static_cast<int>(coef.rows()); }
};

namespace detail {

inline Eigen::MatrixXd eval_fourier_raw(int m, const Eigen::VectorXd& grid) {
  Eigen::MatrixXd E(grid.size(), m);
  const double sqrt2 = std::numbers::sqrt2;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    double t = grid(i);
    for (int j = 0; j < m; ++j) {
      if (j == 0) {
        E(i, j) = 1.0;
      } else {
        int freq = (j + 1) / 2;
        double arg = 2.0 * std::numbers::pi * freq * t;
        E(i, j) = (j % 2 == 1) ? sqrt2 * std::sin(arg) : sqrt2 * std::cos(arg);
      }
    }
  }
  return E;
}

// Natural cubic splines, truncated-power representation: the space has
// dimension K (= number of knots) and is linear beyond the boundary knots.
//   N_1 = 1, N_2 = t, N_{k+2} = d_k - d_{K-1},
//   d_k(t) = [ (t-xi_k)_+^3 - (t-xi_K)_+^3 ] / (xi_K - xi_k).
inline Eigen::MatrixXd eval_natural_spline_raw(const Eigen::VectorXd& knots,
                                               const Eigen::VectorXd& grid) {
  const int K = static_cast<int>(knots.size());
  auto cube_pos = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
  auto d = [&](int k, double t) {
    return (cube_pos(t - knots(k)) - cube_pos(t - knots(K - 1))) /
           (knots(K - 1) - knots(k));
  };
  Eigen::MatrixXd E(grid.size(), K);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    double t = grid(i);
    E(i, 0) = 1.0;
    E(i, 1) = t;
    for (int k = 0; k < K - 2; ++k) E(i, k + 2) = d(k, t) - d(K - 2, t);
  }
  return E;
}

inline Eigen::MatrixXd eval_tabulated_raw(const Eigen::VectorXd& tab_grid,
                                          const Eigen::MatrixXd& tab_values,
                                          const Eigen::VectorXd& grid) {
  Eigen::MatrixXd E(grid.size(), tab_values.cols());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    double t = grid(i);
    // locate the bracketing interval (clamped linear interpolation)
    Eigen::Index hi = 1;
    while (hi < tab_grid.size() - 1 && tab_grid(hi) < t) ++hi;
    Eigen::Index lo = hi - 1;
    double span = tab_grid(hi) - tab_grid(lo);
    double w = span > 0.0 ? std::clamp((t - tab_grid(lo)) / span, 0.0, 1.0) : 0.0;
    E.row(i) = (1.0 - w) * tab_values.row(lo) + w * tab_values.row(hi);
  }
  return E;
}

inline Eigen::MatrixXd eval_raw(const BasisSet& b, const Eigen::VectorXd& grid) {
  switch (b.kind) {
    case BasisKind::fourier: return eval_fourier_raw(b.raw_size(), grid);
    case BasisKind::natural_spline: return eval_natural_spline_raw(b.knots, grid);
    case BasisKind::tabulated: return eval_tabulated_raw(b.tab_grid, b.tab_values, grid);
  }
  throw InvalidArgument("evaluate: unknown basis kind");
}

}  // namespace detail

// Entry (i,j) = value of basis function j at grid(i). An empty grid yields
// a 0 x m matrix.
inline Eigen::MatrixXd evaluate(const BasisSet& b, const Eigen::VectorXd& grid) {
  if (grid.size() == 0) return Eigen::MatrixXd(0, b.m);
  return detail::eval_raw(b, grid) * b.coef;
}

// First m functions of {1, sqrt2*sin(2*pi*t), sqrt2*cos(2*pi*t), ...};
// orthonormal in exact L2 already.
inline BasisSet fourier_basis(int m, QuadratureRule quad = trapezoid_rule()) {
  if (m < 1) throw InvalidArgument("fourier_basis: m must be >= 1");
  BasisSet b;
  b.kind = BasisKind::fourier;
  b.m = m;
  b.coef = Eigen::MatrixXd::Identity(m, m);
  b.orthonormalized = true;
  b.quad = std::move(quad);
  return b;
}

// Natural cubic spline basis with the given knots; dimension = #knots.
// Not orthonormal until passed through `orthonormalize`.
inline BasisSet natural_spline_basis(const Eigen::VectorXd& knots,
                                     QuadratureRule quad = trapezoid_rule()) {
  if (knots.size() < 2)
    throw InvalidArgument("natural_spline_basis: need at least 2 knots");
  for (Eigen::Index i = 1; i < knots.size(); ++i)
    if (!(knots(i) > knots(i - 1)))
      throw InvalidArgument("natural_spline_basis: knots must be strictly increasing");
  BasisSet b;
  b.kind = BasisKind::natural_spline;
  b.m = static_cast<int>(knots.size());
  b.knots = knots;
  b.coef = Eigen::MatrixXd::Identity(b.m, b.m);
  b.orthonormalized = false;
  b.quad = std::move(quad);
  return b;
}

inline BasisSet tabulated_basis(const Eigen::VectorXd& grid,
                                const Eigen::MatrixXd& values,
                                QuadratureRule quad = trapezoid_rule()) {
  if (grid.size() != values.rows() || grid.size() < 2)
    throw InvalidArgument("tabulated_basis: grid/value shape mismatch");
  BasisSet b;
  b.kind = BasisKind::tabulated;
  b.m = static_cast<int>(values.cols());
  b.coef = Eigen::MatrixXd::Identity(b.m, b.m);
  b.tab_grid = grid;
  b.tab_values = values;
  b.quad = std::move(quad);
  return b;
}

// Gram matrix of the exposed functions under `quad`.
inline Eigen::MatrixXd gram_matrix(const BasisSet& b, const QuadratureRule& quad) {
  Eigen::MatrixXd E = evaluate(b, quad.nodes);
  return E.transpose() * quad.weights.asDiagonal() * E;
}

// Change of coordinates making the Gram matrix the identity under `quad`
// (Cholesky of the Gram, i.e. Gram-Schmidt in exact arithmetic, order
// preserving). Signs are fixed so the first non-negligible value of each
// function at the quadrature nodes is positive.
inline BasisSet orthonormalize(const BasisSet& basis,
                               const QuadratureRule& quad = trapezoid_rule()) {
  BasisSet out = basis;
  out.quad = quad;
  Eigen::MatrixXd G = gram_matrix(basis, quad);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(G));
  double lmin = es.eigenvalues().minCoeff();
  double lmax = es.eigenvalues().maxCoeff();
  double condition = (lmin > 0.0) ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(lmin > 0.0) || condition >= 1e12) {
    std::ostringstream msg;
    msg << "orthonormalize: Gram matrix numerically singular (condition number "
        << condition << ")";
    throw DegenerateBasis(msg.str());
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sym(G));
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "orthonormalize: Cholesky failed (condition number " << condition << ")";
    throw DegenerateBasis(msg.str());
  }
  // functions_new = functions_old * L^{-T}  =>  coef_new = coef_old * L^{-T}
  Eigen::MatrixXd Linv_t = llt.matrixL()
                               .solve(Eigen::MatrixXd::Identity(G.rows(), G.cols()))
                               .transpose();
  out.coef = basis.coef * Linv_t;
  out.orthonormalized = true;

  Eigen::MatrixXd vals = evaluate(out, quad.nodes);
  for (int j = 0; j < out.m; ++j) {
    double scale = vals.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < vals.rows(); ++i) {
      if (std::abs(vals(i, j)) > 1e-8 * scale) {
        if (vals(i, j) < 0.0) out.coef.col(j) = -out.coef.col(j);
        break;
      }
    }
  }
  return out;
}

}  // namespace fepls
