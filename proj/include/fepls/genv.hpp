#pragma once

// Logistic-response envelope model on basis coordinates: binary y given a
// functional predictor is modeled through eta' Gamma' x with Gamma spanning a
// reducing subspace of Sigma_x.  Fitting alternates an exact logistic refit
// (IRLS) with one row-descent sweep over the Grassmann coordinates of Gamma,
// so the joint objective decreases at every half-step.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fepls/envelope.hpp"
#include "fepls/errors.hpp"
#include "fepls/glm.hpp"
#include "fepls/grassmann.hpp"
#include "fepls/linalg.hpp"
#include "fepls/moments.hpp"

namespace fepls {

inline double mean_deviance(const Eigen::VectorXd& zeta, const Eigen::VectorXi& y) {
  return -2.0 * bernoulli_loglik(zeta, y) / static_cast<double>(zeta.size());
}

// Deviance term -(2/n) sum_i [ y_i zeta_i - log(1+e^{zeta_i}) ] as a function
// of the unnormalized Grassmann coordinates C, with zeta = alpha + Xc C K^{-1/2} eta
// and K = C'C.  The row gradient propagates through K^{-1/2} via a Lyapunov solve.
class LogisticDevianceTerm : public GammaTermBase {
 public:
  LogisticDevianceTerm(const Eigen::MatrixXd& Xc, const Eigen::VectorXi& y)
      : Xc_(Xc), y_(y), n_(static_cast<double>(Xc.rows())) {}

  void set_glm(double alpha, const Eigen::VectorXd& eta) {
    alpha_ = alpha;
    eta_ = eta;
  }

  double value(const Eigen::MatrixXd& C) const override {
    Eigen::MatrixXd N = inv_sqrt_spd(C.transpose() * C);
    Eigen::VectorXd zeta = (Xc_ * (C * (N * eta_))).array() + alpha_;
    return mean_deviance(zeta, y_);
  }

  double value_and_row_grad(const Eigen::MatrixXd& C, int row,
                            Eigen::VectorXd& grad) const override {
    Eigen::MatrixXd K = C.transpose() * C;
    Eigen::MatrixXd N = inv_sqrt_spd(K);
    Eigen::VectorXd w = N * eta_;
    Eigen::VectorXd zeta = (Xc_ * (C * w)).array() + alpha_;
    double val = 0.0;
    Eigen::VectorXd resid(y_.size());
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      val += y_(i) * zeta(i) - log1pexp(zeta(i));
      resid(i) = y_(i) - sigmoid(zeta(i));
    }
    val *= -2.0 / n_;
    Eigen::VectorXd r = (-2.0 / n_) * (Xc_.transpose() * resid);
    // d(dev) = tr(eta r' dC) + tr(S dN) with S = eta (C'r)'; N T + T N = sym(S)
    // turns the dN term into tr(W dK), W = -K^{-1} T K^{-1}.
    Eigen::MatrixXd S = sym(eta_ * (C.transpose() * r).transpose());
    Eigen::MatrixXd T = lyap_spd(N, S);
    Eigen::MatrixXd Kinv = N * N;
    Eigen::MatrixXd W = -(Kinv * T * Kinv);
    grad = r(row) * w + 2.0 * (C.row(row) * W).transpose();
    return val;
  }

 private:
  const Eigen::MatrixXd& Xc_;
  const Eigen::VectorXi& y_;
  double n_;
  double alpha_ = 0.0;
  Eigen::VectorXd eta_;
};

// Joint objective of the logistic envelope at dimension u = cols(Gamma):
// mean deviance plus log|G' Sx G| + log|G' Sx^{-1} G|.  Gamma must be
// semiorthogonal; Sx is the (divisor-n) covariance of Xtil.
inline double gmelm_objective(double alpha, const Eigen::VectorXd& eta,
                              const Eigen::MatrixXd& Gamma,
                              const Eigen::MatrixXd& Xtil, const Eigen::VectorXi& y) {
  if (Gamma.rows() != Xtil.cols())
    throw InvalidArgument("gmelm_objective: Gamma rows must match coordinate count");
  if (eta.size() != Gamma.cols())
    throw InvalidArgument("gmelm_objective: eta length must match Gamma columns");
  if (Gamma.cols() > 0 && !is_semiorthogonal(Gamma))
    throw InvalidArgument("gmelm_objective: Gamma is not semiorthogonal");
  const Eigen::Index n = Xtil.rows();
  if (y.size() != n) throw InvalidArgument("gmelm_objective: response length mismatch");
  Eigen::VectorXd zeta = Eigen::VectorXd::Constant(n, alpha);
  if (Gamma.cols() > 0) zeta += Xtil * (Gamma * eta);
  double dev = mean_deviance(zeta, y);
  if (Gamma.cols() == 0) return dev;
  Eigen::RowVectorXd xm = Xtil.colwise().mean();
  Eigen::MatrixXd Xc = Xtil.rowwise() - xm;
  Eigen::MatrixXd SX = sym(Xc.transpose() * Xc / static_cast<double>(n));
  return dev + semiorth_objective(Gamma, SX, inverse_spd(SX));
}

struct GmelmFit {
  int u = 0;
  Eigen::MatrixXd Gamma;   // m_x x u
  Eigen::MatrixXd Gamma0;  // m_x x (m_x - u)
  Eigen::VectorXd eta;     // u
  double alpha = 0.0;      // intercept on raw (uncentered) coordinates
  Eigen::MatrixXd Delta;   // u x u
  Eigen::MatrixXd Delta0;  // (m_x-u) x (m_x-u)
  Eigen::VectorXd beta;    // m_x, equals Gamma * eta
  double loglik = 0.0;     // Bernoulli log-likelihood at (alpha, beta)
  double objective = 0.0;  // joint objective value at the optimum
  Eigen::MatrixXd V_gmelm;
  bool converged = false;
  bool separation = false;
  int iterations = 0;  // outer alternations
  int mono_violations = 0;
  double worst_violation = 0.0;
  Eigen::VectorXd x_mean;
};

// Plug-in asymptotic covariance of sqrt(n) * beta_hat for the logistic
// envelope.  The unconstrained-GLM covariance Vt (inverse Fisher information,
// intercept profiled out) is projected onto the envelope and the complement
// contributes through the pseudo-inverse of
//   c*eta eta' (x) Delta0 + Delta (x) Delta0^{-1} + Delta^{-1} (x) Delta0 - 2I
// with c the average Bernoulli variance of the fitted probabilities.
inline Eigen::MatrixXd asymptotic_variance_gmelm(const GmelmFit& fit,
                                                 const Eigen::MatrixXd& Xtil) {
  const Eigen::Index p = Xtil.cols(), n = Xtil.rows();
  const int u = fit.u;
  if (u == 0) return Eigen::MatrixXd::Zero(p, p);

  Eigen::VectorXd zeta = (Xtil * fit.beta).array() + fit.alpha;
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double pr = sigmoid(zeta(i));
    w(i) = pr * (1.0 - pr);
  }
  double chat = w.mean();

  Eigen::MatrixXd D(p + 1, p + 1);
  D(0, 0) = w.sum();
  D.block(0, 1, 1, p) = w.transpose() * Xtil;
  D.block(1, 0, p, 1) = D.block(0, 1, 1, p).transpose();
  D.block(1, 1, p, p) = Xtil.transpose() * w.asDiagonal() * Xtil;
  D /= static_cast<double>(n);
  Eigen::MatrixXd Vfull = pinv_sym(sym(D));
  Eigen::MatrixXd Vt = Vfull.block(1, 1, p, p);
  if (u == static_cast<int>(p)) return Vt;

  Eigen::MatrixXd P = fit.Gamma * fit.Gamma.transpose();
  Eigen::MatrixXd V = sym(P * Vt * P);

  Eigen::MatrixXd etaeta = fit.eta * fit.eta.transpose();
  Eigen::MatrixXd D0inv = inverse_spd(fit.Delta0);
  Eigen::MatrixXd Dinv = inverse_spd(fit.Delta);
  Eigen::MatrixXd M = chat * kron(etaeta, fit.Delta0) + kron(fit.Delta, D0inv) +
                      kron(Dinv, fit.Delta0);
  M.diagonal().array() -= 2.0;
  Eigen::MatrixXd L = kron(fit.eta.transpose(), fit.Gamma0);  // p x (u*(p-u))
  V += sym(L * pinv_sym(sym(M)) * L.transpose());
  return sym(V);
}

namespace detail {

struct GmelmDescent {
  Eigen::MatrixXd Gamma;
  double alpha_c = 0.0;
  Eigen::VectorXd eta;
  double fval = std::numeric_limits<double>::infinity();
  int alternations = 0;
  bool converged = false;
  bool separation = false;
  int mono_violations = 0;
  double worst_violation = 0.0;
};

// Alternate exact logistic refit and one full row sweep, both acting on the
// same objective, starting from the span of G_init.
inline GmelmDescent gmelm_descend(const Eigen::MatrixXd& Xc, const Eigen::VectorXi& y,
                                  const Eigen::MatrixXd& SX, const Eigen::MatrixXd& SXinv,
                                  const Eigen::MatrixXd& G_init,
                                  const AlternatingOptions& opts = {}) {
  const int p = static_cast<int>(SX.rows());
  const int u = static_cast<int>(G_init.cols());
  LogisticDevianceTerm dev_term(Xc, y);
  GmelmDescent out;

  std::vector<int> idI = pivot_rows(G_init);
  std::vector<int> freeR;
  for (int i = 0; i < p; ++i)
    if (std::find(idI.begin(), idI.end(), i) == idI.end()) freeR.push_back(i);
  Eigen::MatrixXd B(u, u), Gfree(p - u, u);
  for (int i = 0; i < u; ++i) B.row(i) = G_init.row(idI[i]);
  for (int i = 0; i < p - u; ++i) Gfree.row(i) = G_init.row(freeR[i]);
  Eigen::MatrixXd A = B.transpose()
                          .colPivHouseholderQr()
                          .solve(Gfree.transpose())
                          .transpose();

  auto realize = [&]() {
    Eigen::MatrixXd C = assemble_C(p, idI, freeR, A);
    Eigen::MatrixXd G = C * inv_sqrt_spd(C.transpose() * C);
    return G;
  };
  Eigen::MatrixXd G = realize();

  double F = std::numeric_limits<double>::infinity();
  double alpha_c = 0.0;
  Eigen::VectorXd eta;
  const double slack = opts.mono_slack;

  for (int alt = 0; alt < opts.max_sweeps; ++alt) {
    out.alternations = alt + 1;

    // re-pivot if the affine coordinates blow up (span is preserved)
    if (A.size() > 0 && A.cwiseAbs().maxCoeff() > 1e8) {
      idI = pivot_rows(G);
      freeR.clear();
      for (int i = 0; i < p; ++i)
        if (std::find(idI.begin(), idI.end(), i) == idI.end()) freeR.push_back(i);
      Eigen::MatrixXd Bn(u, u), Gn(p - u, u);
      for (int i = 0; i < u; ++i) Bn.row(i) = G.row(idI[i]);
      for (int i = 0; i < p - u; ++i) Gn.row(i) = G.row(freeR[i]);
      A = Bn.transpose().colPivHouseholderQr().solve(Gn.transpose()).transpose();
      G = realize();
    }

    // exact GLM half-step at fixed span (warm-started when coordinates agree)
    GlmFit glm = irls_logistic(Xc * G, y, alpha_c, eta);
    alpha_c = glm.alpha;
    eta = glm.coef;
    out.separation = glm.separation;
    Eigen::VectorXd zeta = (Xc * (G * eta)).array() + alpha_c;
    double F_new = mean_deviance(zeta, y) + semiorth_objective(G, SX, SXinv);
    if (!std::isfinite(F_new)) throw NumericalError("gmelm: objective not finite");
    if (F_new > F + slack * (1.0 + std::abs(F))) {
      ++out.mono_violations;
      out.worst_violation = std::max(out.worst_violation, F_new - F);
    }
    double F_prev_alt = F;
    F = F_new;  // state now sits at the refit value

    // one full row sweep of the Grassmann coordinates at fixed (alpha, eta)
    dev_term.set_glm(alpha_c, eta);
    for (int k = 0; k < static_cast<int>(freeR.size()); ++k) {
      std::vector<int> others;
      others.reserve(freeR.size() - 1);
      Eigen::MatrixXd A1(static_cast<int>(freeR.size()) - 1, u);
      int r = 0;
      for (int j = 0; j < static_cast<int>(freeR.size()); ++j) {
        if (j == k) continue;
        others.push_back(freeR[j]);
        A1.row(r++) = A.row(j);
      }
      RowContext ctx;
      try {
        ctx = build_row_context(SX, SXinv, idI, others, freeR[k], A1, &dev_term);
      } catch (const NumericalError&) {
        continue;
      }
      Eigen::VectorXd a0 = A.row(k).transpose();
      auto fg = [&](const Eigen::VectorXd& a, Eigen::VectorXd& g) {
        g = row_gradient(a, ctx);
        return row_objective(a, ctx);
      };
      LbfgsResult res = lbfgs_minimize(fg, a0, opts.inner);
      if (std::isfinite(res.f) && res.f <= F) {
        A.row(k) = res.x.transpose();
        F = res.f;
      }
    }
    G = realize();

    if (std::isfinite(F_prev_alt) &&
        std::abs(F_prev_alt - F) <= opts.outer_rel_tol * (1.0 + std::abs(F))) {
      out.converged = true;
      break;
    }
  }

  // final exact refit so (alpha, eta) matches the reported Gamma
  GlmFit glm = irls_logistic(Xc * G, y, alpha_c, eta);
  out.Gamma = G;
  out.alpha_c = glm.alpha;
  out.eta = glm.coef;
  out.separation = glm.separation;
  Eigen::VectorXd zeta = (Xc * (G * glm.coef)).array() + glm.alpha;
  out.fval = mean_deviance(zeta, y) + semiorth_objective(G, SX, SXinv);
  return out;
}

}  // namespace detail

// Fit the logistic envelope at dimension u.  extra_inits lets a dimension
// sweep warm-start from the previous fit extended by complement directions.
inline GmelmFit fit_gmelm(const Eigen::MatrixXd& Xtil, const Eigen::VectorXi& y, int u,
                          const std::vector<Eigen::MatrixXd>& extra_inits = {},
                          const AlternatingOptions& opts = {}) {
  const Eigen::Index n = Xtil.rows(), p = Xtil.cols();
  if (y.size() != n) throw InvalidArgument("fit_gmelm: response length mismatch");
  if (n < 2) throw InsufficientData("fit_gmelm: need at least 2 observations");
  if (u < 0 || u > static_cast<int>(p))
    throw InvalidArgument("fit_gmelm: u must lie in [0, m_x]");
  if (n <= p)
    throw InsufficientData(
        "fit_gmelm: need n > m_x for a nonsingular coordinate covariance; "
        "use a smaller basis or ridge coordinates");

  GmelmFit fit;
  fit.u = u;
  Eigen::RowVectorXd xm = Xtil.colwise().mean();
  fit.x_mean = xm.transpose();
  Eigen::MatrixXd Xc = Xtil.rowwise() - xm;
  Eigen::MatrixXd SX = sym(Xc.transpose() * Xc / static_cast<double>(n));

  if (u == 0) {
    double ybar = y.cast<double>().mean();
    double a;
    if (ybar <= 0.0 || ybar >= 1.0) {
      a = ybar <= 0.0 ? -30.0 : 30.0;
      fit.separation = true;
    } else {
      a = std::log(ybar / (1.0 - ybar));
    }
    fit.Gamma = Eigen::MatrixXd::Zero(p, 0);
    fit.Gamma0 = Eigen::MatrixXd::Identity(p, p);
    fit.eta = Eigen::VectorXd::Zero(0);
    fit.alpha = a;
    fit.Delta = Eigen::MatrixXd::Zero(0, 0);
    fit.Delta0 = SX;
    fit.beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd zeta = Eigen::VectorXd::Constant(n, a);
    fit.objective = mean_deviance(zeta, y);
    fit.loglik = bernoulli_loglik(zeta, y);
    fit.V_gmelm = Eigen::MatrixXd::Zero(p, p);
    fit.converged = true;
    return fit;
  }

  Eigen::MatrixXd SXinv = inverse_spd(SX);

  if (u == static_cast<int>(p)) {
    GlmFit glm = irls_logistic(Xc, y);
    fit.Gamma = Eigen::MatrixXd::Identity(p, p);
    fit.Gamma0 = Eigen::MatrixXd::Zero(p, 0);
    fit.eta = glm.coef;
    fit.Delta = SX;
    fit.Delta0 = Eigen::MatrixXd::Zero(0, 0);
    fit.beta = glm.coef;
    fit.separation = glm.separation;
    fit.converged = glm.converged || glm.separation;
    fit.iterations = glm.iterations;
    Eigen::VectorXd zeta = (Xc * glm.coef).array() + glm.alpha;
    fit.objective = mean_deviance(zeta, y) + logdet_spd(SX) + logdet_spd(SXinv);
    fit.alpha = glm.alpha - glm.coef.dot(fit.x_mean);
    Eigen::VectorXd zr = (Xtil * fit.beta).array() + fit.alpha;
    fit.loglik = bernoulli_loglik(zr, y);
    fit.V_gmelm = asymptotic_variance_gmelm(fit, Xtil);
    return fit;
  }

  // Rank starting spans by the joint objective after an exact logistic refit,
  // then descend from the best two distinct candidates.
  Eigen::MatrixXd Ymat = y.cast<double>();
  SampleMoments m = sample_moments(Xtil, Ymat);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(SX);
  std::vector<Eigen::MatrixXd> cands = detail::candidate_inits(m, m.SXgY, SXinv, u);
  {  // direction of the unconstrained logistic MLE, padded to u columns
    GlmFit full = irls_logistic(Xc, y);
    double nb = full.coef.norm();
    if (nb > 1e-12) {
      Eigen::MatrixXd dir = full.coef / nb;
      cands.push_back(detail::pad_with_eigvecs(dir, u, es.eigenvectors()));
    }
  }
  for (const auto& G : extra_inits)
    if (G.rows() == p && G.cols() == u) cands.push_back(G);

  std::vector<std::pair<double, int>> ranked;
  for (int i = 0; i < static_cast<int>(cands.size()); ++i) {
    double val = std::numeric_limits<double>::infinity();
    try {
      GlmFit glm = irls_logistic(Xc * cands[i], y);
      Eigen::VectorXd zeta = (Xc * (cands[i] * glm.coef)).array() + glm.alpha;
      val = mean_deviance(zeta, y) + semiorth_objective(cands[i], SX, SXinv);
    } catch (const Error&) {
    }
    if (std::isfinite(val)) ranked.emplace_back(val, i);
  }
  if (ranked.empty()) throw NumericalError("fit_gmelm: no feasible starting value");
  std::sort(ranked.begin(), ranked.end());

  detail::GmelmDescent best;
  int runs = 0;
  for (int r = 0; r < static_cast<int>(ranked.size()) && runs < 2; ++r) {
    try {
      detail::GmelmDescent d =
          detail::gmelm_descend(Xc, y, SX, SXinv, cands[ranked[r].second], opts);
      ++runs;
      if (d.fval < best.fval) best = d;
    } catch (const NumericalError&) {
    }
  }
  if (runs == 0) throw NumericalError("fit_gmelm: all descents failed");

  fit.Gamma = best.Gamma;
  fit.Gamma0 = orthonormal_complement(best.Gamma);
  fit.eta = best.eta;
  fit.Delta = sym(fit.Gamma.transpose() * SX * fit.Gamma);
  fit.Delta0 = sym(fit.Gamma0.transpose() * SX * fit.Gamma0);
  fit.beta = fit.Gamma * fit.eta;
  fit.objective = best.fval;
  fit.converged = best.converged;
  fit.separation = best.separation;
  fit.iterations = best.alternations;
  fit.mono_violations = best.mono_violations;
  fit.worst_violation = best.worst_violation;
  fit.alpha = best.alpha_c - fit.beta.dot(fit.x_mean);
  Eigen::VectorXd zeta = (Xtil * fit.beta).array() + fit.alpha;
  fit.loglik = bernoulli_loglik(zeta, y);
  fit.V_gmelm = asymptotic_variance_gmelm(fit, Xtil);
  return fit;
}

// Joint log-likelihood (response and predictor coordinates) used by BIC:
// -(n/2) [ objective + m_x(log(2*pi)+1) + log|Sx| ].
inline double gmelm_loglik(double objective, const Eigen::MatrixXd& SX, Eigen::Index n) {
  const double p = static_cast<double>(SX.rows());
  return -0.5 * static_cast<double>(n) *
         (objective + p * (std::log(2.0 * M_PI) + 1.0) + logdet_spd(SX));
}

inline int gmelm_param_count(int u, int p) { return 1 + u + p * (p + 1) / 2; }

struct GmelmSelectResult {
  int u_hat = 0;
  GmelmFit fit;
  std::vector<BicRow> rows;
};

// BIC over u = 0..u_max with warm starts: each dimension seeds candidates by
// extending the previous fit with every complement eigvector, which keeps the
// joint log-likelihood non-decreasing along the path.
inline GmelmSelectResult select_dim_bic_gmelm(const Eigen::MatrixXd& Xtil,
                                              const Eigen::VectorXi& y, int u_max = -1) {
  const Eigen::Index n = Xtil.rows(), p = Xtil.cols();
  if (u_max < 0) u_max = default_u_max(static_cast<int>(p), n);
  if (u_max > static_cast<int>(p))
    throw InvalidArgument("select_dim_bic_gmelm: u_max exceeds m_x");

  Eigen::RowVectorXd xm = Xtil.colwise().mean();
  Eigen::MatrixXd Xc = Xtil.rowwise() - xm;
  Eigen::MatrixXd SX = sym(Xc.transpose() * Xc / static_cast<double>(n));

  GmelmSelectResult out;
  bool have_best = false;
  double best_bic = std::numeric_limits<double>::infinity();
  GmelmFit prev;
  bool have_prev = false;

  for (int u = 0; u <= u_max; ++u) {
    BicRow row;
    row.u = u;
    row.params = gmelm_param_count(u, static_cast<int>(p));
    try {
      std::vector<Eigen::MatrixXd> extras;
      if (have_prev && prev.u == u - 1 && u >= 1 && prev.Gamma0.cols() > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prev.Delta0);
        if (es.info() == Eigen::Success) {
          for (int j = static_cast<int>(prev.Gamma0.cols()) - 1; j >= 0; --j) {
            Eigen::MatrixXd ext(p, u);
            if (u > 1) ext.leftCols(u - 1) = prev.Gamma;
            ext.col(u - 1) = prev.Gamma0 * es.eigenvectors().col(j);
            extras.push_back(ext);
          }
        }
      }
      GmelmFit fit = fit_gmelm(Xtil, y, u, extras);
      row.loglik = gmelm_loglik(fit.objective, SX, n);
      row.bic = -2.0 * row.loglik + std::log(static_cast<double>(n)) * row.params;
      row.ok = true;
      if (!have_best || row.bic < best_bic) {
        best_bic = row.bic;
        out.u_hat = u;
        out.fit = fit;
        have_best = true;
      }
      prev = std::move(fit);
      have_prev = true;
    } catch (const Error& e) {
      row.ok = false;
      row.note = e.what();
    }
    out.rows.push_back(row);
  }
  if (!have_best) throw NumericalError("select_dim_bic_gmelm: no dimension could be fit");
  return out;
}

// Exact logistic refit at a fixed semiorthogonal Gamma.
inline GlmFit glm_step(const Eigen::MatrixXd& Xtil, const Eigen::VectorXi& y,
                       const Eigen::MatrixXd& Gamma, double start_alpha = 0.0,
                       const Eigen::VectorXd& start_eta = Eigen::VectorXd()) {
  if (Gamma.rows() != Xtil.cols())
    throw InvalidArgument("glm_step: Gamma rows must match coordinate count");
  return irls_logistic(Xtil * Gamma, y, start_alpha, start_eta);
}

}  // namespace fepls
