#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <limits>

namespace fepls {

struct LbfgsOptions {
  int max_iter = 50;
  double grad_tol = 1e-9;   // stop when ||grad||_inf <= grad_tol
  int memory = 8;
  int max_linesearch = 40;
  double armijo_c1 = 1e-4;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Limited-memory BFGS with a backtracking Armijo line search. `fg` is
// called as fg(x, grad) and returns the objective, filling the gradient.
// Small dense problems only (the per-row Grassmann subproblems); descent
// is guaranteed because steps are accepted only when they improve f.
template <class FG>
LbfgsResult lbfgs_minimize(FG&& fg, Eigen::VectorXd x0, const LbfgsOptions& opts = {}) {
  using Eigen::VectorXd;
  const Eigen::Index d = x0.size();
  LbfgsResult res;
  VectorXd g(d), g_new(d);
  double f = fg(x0, g);
  res.x = x0;
  res.f = f;
  if (!std::isfinite(f)) return res;

  std::deque<VectorXd> S, Y;
  std::deque<double> rho;
  VectorXd x = x0;

  for (int it = 0; it < opts.max_iter; ++it) {
    if (g.cwiseAbs().maxCoeff() <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    // two-loop recursion
    VectorXd q = g;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    if (!S.empty()) {
      double gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t i = 0; i < S.size(); ++i) {
      double beta = rho[i] * Y[i].dot(q);
      q += (alpha[i] - beta) * S[i];
    }
    VectorXd dir = -q;
    double dg = dir.dot(g);
    if (!(dg < 0.0) || !dir.allFinite()) {  // not a descent direction: reset
      dir = -g;
      dg = -g.squaredNorm();
      S.clear();
      Y.clear();
      rho.clear();
    }

    double step = (it == 0 && S.empty()) ? std::min(1.0, 1.0 / std::max(1.0, g.norm())) : 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    VectorXd x_new;
    bool ok = false;
    for (int ls = 0; ls < opts.max_linesearch; ++ls) {
      x_new = x + step * dir;
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + opts.armijo_c1 * step * dg) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok || f_new >= f) break;  // no acceptable improving step

    VectorXd s = x_new - x;
    VectorXd y = g_new - g;
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > opts.memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    x = x_new;
    f = f_new;
    g = g_new;
    res.x = x;
    res.f = f;
    res.iterations = it + 1;
  }
  if (g.cwiseAbs().maxCoeff() <= opts.grad_tol) res.converged = true;
  return res;
}

}  // namespace fepls
