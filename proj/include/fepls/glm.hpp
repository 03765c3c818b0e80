#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "fepls/errors.hpp"
#include "fepls/linalg.hpp"

namespace fepls {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double log1pexp(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Bernoulli log-likelihood sum_i [ y_i zeta_i - log(1+e^{zeta_i}) ].
inline double bernoulli_loglik(const Eigen::VectorXd& zeta, const Eigen::VectorXi& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < zeta.size(); ++i)
    ll += y(i) * zeta(i) - log1pexp(zeta(i));
  return ll;
}

struct GlmFit {
  double alpha = 0.0;
  Eigen::VectorXd coef;
  bool converged = false;
  bool separation = false;
  int iterations = 0;
};

// Logistic MLE by iteratively reweighted least squares on [1, Z].
// Convergence: per-observation score max-norm below `tol`. Coefficients are
// capped at |b| <= 30; hitting the cap flags (quasi-)separation.
inline GlmFit irls_logistic(const Eigen::MatrixXd& Z, const Eigen::VectorXi& y,
                            double start_alpha = 0.0,
                            const Eigen::VectorXd& start_coef = Eigen::VectorXd(),
                            double tol = 1e-9, int max_iter = 100) {
  const Eigen::Index n = Z.rows(), d = Z.cols();
  if (y.size() != n) throw InvalidArgument("irls_logistic: response length mismatch");

  GlmFit fit;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d + 1);
  b(0) = start_alpha;
  if (start_coef.size() == d) b.tail(d) = start_coef;

  const double cap = 30.0;
  Eigen::VectorXd zeta(n), prob(n);
  auto predictor = [&](const Eigen::VectorXd& bb) {
    return (Z * bb.tail(d)).array() + bb(0);
  };
  zeta = predictor(b);
  for (Eigen::Index i = 0; i < n; ++i) prob(i) = sigmoid(zeta(i));
  double ll = bernoulli_loglik(zeta, y);

  for (int it = 0; it < max_iter; ++it) {
    fit.iterations = it + 1;
    Eigen::VectorXd resid = y.cast<double>() - prob;
    Eigen::VectorXd score(d + 1);
    score(0) = resid.sum() / n;
    score.tail(d) = Z.transpose() * resid / n;
    if (score.cwiseAbs().maxCoeff() < tol) {
      fit.converged = true;
      break;
    }
    Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd I(d + 1, d + 1);
    I(0, 0) = w.sum() / n;
    I.block(0, 1, 1, d) = (w.transpose() * Z) / n;
    I.block(1, 0, d, 1) = I.block(0, 1, 1, d).transpose();
    I.block(1, 1, d, d) = Z.transpose() * w.asDiagonal() * Z / n;
    I.diagonal().array() += 1e-12;  // guard a flat weight profile
    Eigen::LDLT<Eigen::MatrixXd> ldlt(I);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("irls_logistic: singular Fisher information");
    Eigen::VectorXd step = ldlt.solve(score);

    // step-halving: accept the first step that does not reduce the likelihood
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h < 30; ++h) {
      Eigen::VectorXd b_new = b + scale * step;
      Eigen::VectorXd z_new = predictor(b_new);
      double ll_new = bernoulli_loglik(z_new, y);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * (1.0 + std::abs(ll))) {
        b = b_new;
        zeta = z_new;
        ll = ll_new;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;
    if (b.cwiseAbs().maxCoeff() > cap) {  // diverging: separation
      b = b.cwiseMax(-cap).cwiseMin(cap);
      zeta = predictor(b);
      ll = bernoulli_loglik(zeta, y);
      fit.separation = true;
      break;
    }
    for (Eigen::Index i = 0; i < n; ++i) prob(i) = sigmoid(zeta(i));
  }

  // post-hoc detector: the score can fall below tol on completely separated
  // data before the coefficient cap is reached (residuals decay like
  // exp(-|zeta|)), so also flag fits where every observation sits on the
  // correct side with an extreme margin
  if (!fit.separation && n > 0) {
    double min_margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
      min_margin = std::min(min_margin, (2.0 * y(i) - 1.0) * zeta(i));
    if (min_margin > 10.0) fit.separation = true;
  }

  fit.alpha = b(0);
  fit.coef = b.tail(d);
  return fit;
}

}  // namespace fepls
