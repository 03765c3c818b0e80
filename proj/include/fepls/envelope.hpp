#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "fepls/baselines.hpp"
#include "fepls/errors.hpp"
#include "fepls/grassmann.hpp"
#include "fepls/linalg.hpp"
#include "fepls/moments.hpp"

namespace fepls {

// Fitted multivariate predictor-envelope linear model on coordinates.
struct MpelmFit {
  int u = 0;
  Eigen::MatrixXd Gamma;      // m_x x u semiorthogonal
  Eigen::MatrixXd Gamma0;     // m_x x (m_x - u) orthonormal completion
  Eigen::MatrixXd eta;        // u x m_y
  Eigen::VectorXd alpha;      // m_y intercept
  Eigen::MatrixXd Delta;      // u x u
  Eigen::MatrixXd Delta0;     // (m_x-u) x (m_x-u)
  Eigen::MatrixXd Sigma_eps;  // m_y x m_y
  Eigen::MatrixXd beta;       // m_y x m_x
  double loglik = 0.0;
  Eigen::MatrixXd V_mpelm;    // (m_x m_y) x (m_x m_y)

  double objective = 0.0;     // envelope objective value at Gamma
  bool converged = true;
  int mono_violations = 0;
  Eigen::VectorXd x_mean, y_mean;
};

// log|G'S_XgY G| + log|G'S_X^{-1}G| for semiorthogonal G.
inline double envelope_objective(const Eigen::MatrixXd& G, const SampleMoments& m) {
  if (!is_semiorthogonal(G))
    throw InvalidArgument("envelope_objective: G is not semiorthogonal");
  return semiorth_objective(G, m.SXgY, inverse_spd(m.SX));
}

namespace detail {

// Greedy eigenvector-subset start: among the eigenvectors of S_X, add the
// one minimizing the objective until u columns are chosen.
inline Eigen::MatrixXd greedy_eigvec_init(const Eigen::MatrixXd& M,
                                          const Eigen::MatrixXd& V, int u,
                                          const Eigen::MatrixXd& eigvecs) {
  const int p = static_cast<int>(eigvecs.rows());
  std::vector<int> chosen;
  std::vector<bool> used(p, false);
  Eigen::MatrixXd G(p, u);
  for (int step = 0; step < u; ++step) {
    int best = -1;
    double best_f = std::numeric_limits<double>::infinity();
    for (int j = 0; j < p; ++j) {
      if (used[j]) continue;
      G.col(step) = eigvecs.col(j);
      double f = semiorth_objective(G.leftCols(step + 1), M, V);
      if (f < best_f) {
        best_f = f;
        best = j;
      }
    }
    used[best] = true;
    G.col(step) = eigvecs.col(best);
  }
  return G;
}

inline Eigen::MatrixXd orthonormalize_cols(const Eigen::MatrixXd& W) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(W);
  return qr.householderQ() * Eigen::MatrixXd::Identity(W.rows(), W.cols());
}

// Pad a partial orthonormal start to u columns with unused S_X eigenvectors.
inline Eigen::MatrixXd pad_with_eigvecs(Eigen::MatrixXd G, int u,
                                        const Eigen::MatrixXd& eigvecs) {
  const int p = static_cast<int>(eigvecs.rows());
  while (G.cols() < u) {
    int best = -1;
    double best_res = -1.0;
    for (int j = 0; j < p; ++j) {
      Eigen::VectorXd r = eigvecs.col(j) - G * (G.transpose() * eigvecs.col(j));
      if (r.norm() > best_res) {
        best_res = r.norm();
        best = j;
      }
    }
    Eigen::VectorXd r = eigvecs.col(best) - G * (G.transpose() * eigvecs.col(best));
    G.conservativeResize(Eigen::NoChange, G.cols() + 1);
    G.col(G.cols() - 1) = r / r.norm();
  }
  return G;
}

inline std::vector<Eigen::MatrixXd> candidate_inits(const SampleMoments& m,
                                                    const Eigen::MatrixXd& Mobj,
                                                    const Eigen::MatrixXd& Vobj, int u) {
  std::vector<Eigen::MatrixXd> inits;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.SX);
  inits.push_back(greedy_eigvec_init(Mobj, Vobj, u, es.eigenvectors()));

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.SXY, Eigen::ComputeThinU);
  int k = std::min<int>(u, static_cast<int>(svd.matrixU().cols()));
  inits.push_back(pad_with_eigvecs(svd.matrixU().leftCols(k), u, es.eigenvectors()));

  Eigen::MatrixXd W = simpls_weights(m.SX, m.SXY, u);
  inits.push_back(pad_with_eigvecs(orthonormalize_cols(W), u, es.eigenvectors()));
  return inits;
}

}  // namespace detail

// Minimize the envelope objective over u-dimensional subspaces, trying the
// standard starting candidates (greedy S_X eigenvectors, dominant left
// singular vectors of S_XY, the SIMPLS span) plus any provided starts, and
// descending from the two most promising.
inline AlternatingResult grassmann_minimize_full(
    const SampleMoments& m, int u, const std::vector<Eigen::MatrixXd>& extra_inits = {},
    const AlternatingOptions& opts = {}) {
  const int p = m.m_x();
  if (u < 1 || u > p) throw InvalidArgument("grassmann_minimize: u out of range");
  Eigen::MatrixXd Vobj = inverse_spd(m.SX);
  const Eigen::MatrixXd& Mobj = m.SXgY;
  if (u == p) return alternating_minimize(Mobj, Vobj, u, Eigen::MatrixXd::Identity(p, p),
                                          nullptr, opts);

  std::vector<Eigen::MatrixXd> inits = detail::candidate_inits(m, Mobj, Vobj, u);
  for (const auto& g : extra_inits)
    if (g.rows() == p && g.cols() == u) inits.push_back(g);

  // rank all starts by their objective value, descend from the best two
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < inits.size(); ++i)
    ranked.emplace_back(semiorth_objective(inits[i], Mobj, Vobj), i);
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  AlternatingResult best;
  int runs = 0;
  for (const auto& [f0, idx] : ranked) {
    if (!std::isfinite(f0)) continue;
    AlternatingResult r = alternating_minimize(Mobj, Vobj, u, inits[idx], nullptr, opts);
    if (r.fval < best.fval) best = r;
    if (++runs >= 2) break;
  }
  if (runs == 0) throw NumericalError("grassmann_minimize: no feasible starting point");
  return best;
}

inline Eigen::MatrixXd grassmann_minimize(const SampleMoments& m, int u,
                                          const std::optional<Eigen::MatrixXd>& init =
                                              std::nullopt) {
  std::vector<Eigen::MatrixXd> extra;
  if (init) extra.push_back(*init);
  return grassmann_minimize_full(m, u, extra).Gamma;
}

// Asymptotic covariance of sqrt(n)*vec(beta_hat), vec stacking the columns
// of the m_y x m_x matrix (predictor index slow):
//   V = Phi Delta^{-1} Phi' (x) Sigma_eps
//     + (Phi0 (x) eta') Mdag (Phi0' (x) eta),
//   M = Delta0 (x) eta Sigma_eps^{-1} eta' + Delta0^{-1} (x) Delta
//     + Delta0 (x) Delta^{-1} - 2I.
inline Eigen::MatrixXd asymptotic_variance_mpelm(const MpelmFit& fit) {
  const int p = static_cast<int>(fit.beta.cols());
  const int r = static_cast<int>(fit.beta.rows());
  const int u = fit.u;
  if (u == 0) return Eigen::MatrixXd::Zero(p * r, p * r);

  Eigen::MatrixXd V =
      kron(sym(fit.Gamma * solve_spd(fit.Delta, fit.Gamma.transpose())), fit.Sigma_eps);
  if (u < p) {
    Eigen::MatrixXd mid;
    try {
      mid = sym(fit.eta * solve_spd(fit.Sigma_eps, fit.eta.transpose()));
    } catch (const NumericalError&) {
      mid = sym(fit.eta * pinv_sym(fit.Sigma_eps) * fit.eta.transpose());
    }
    const int q = p - u;
    Eigen::MatrixXd M = kron(fit.Delta0, mid) + kron(inverse_spd(fit.Delta0), fit.Delta) +
                        kron(fit.Delta0, inverse_spd(fit.Delta)) -
                        2.0 * Eigen::MatrixXd::Identity(q * u, q * u);
    Eigen::MatrixXd L = kron(fit.Gamma0, fit.eta.transpose());  // pr x qu
    V += L * pinv_sym(M) * L.transpose();
  }
  return sym(V);
}

// Profile Gaussian log-likelihood of the fitted model.
inline double mpelm_loglik(const SampleMoments& m, double objective_value) {
  const double log2pi = std::log(2.0 * std::numbers::pi);
  return -0.5 * m.n *
         ((m.m_x() + m.m_y()) * (1.0 + log2pi) + logdet_spd(m.SY) + objective_value +
          logdet_spd(m.SX));
}

inline MpelmFit fit_mpelm_from_moments(const SampleMoments& m,
                                       const Eigen::VectorXd& x_mean,
                                       const Eigen::VectorXd& y_mean, int u,
                                       const std::vector<Eigen::MatrixXd>& extra_inits = {}) {
  const int p = m.m_x(), r = m.m_y();
  if (u < 0 || u > p) throw InvalidArgument("fit_mpelm: u out of range");
  if (m.n <= p)
    throw InsufficientData(
        "fit_mpelm: need n > m_x; use a smaller basis or ridge coordinates");

  MpelmFit fit;
  fit.u = u;
  fit.x_mean = x_mean;
  fit.y_mean = y_mean;

  if (u == 0) {
    fit.Gamma = Eigen::MatrixXd(p, 0);
    fit.Gamma0 = Eigen::MatrixXd::Identity(p, p);
    fit.eta = Eigen::MatrixXd(0, r);
    fit.beta = Eigen::MatrixXd::Zero(r, p);
    fit.Delta = Eigen::MatrixXd(0, 0);
    fit.Delta0 = m.SX;
    fit.Sigma_eps = m.SY;
    fit.objective = 0.0;
  } else {
    AlternatingResult opt = grassmann_minimize_full(m, u, extra_inits);
    fit.Gamma = opt.Gamma;
    fit.Gamma0 = orthonormal_complement(opt.Gamma);
    fit.converged = opt.converged;
    fit.mono_violations = opt.mono_violations;
    fit.objective = opt.fval;
    fit.Delta = sym(fit.Gamma.transpose() * m.SX * fit.Gamma);
    fit.Delta0 = sym(fit.Gamma0.transpose() * m.SX * fit.Gamma0);
    fit.eta = solve_spd(fit.Delta, fit.Gamma.transpose() * m.SXY);
    fit.beta = (fit.Gamma * fit.eta).transpose();
    fit.Sigma_eps = sym(m.SY - fit.beta * m.SX * fit.beta.transpose());
  }
  fit.alpha = y_mean - fit.beta * x_mean;
  fit.loglik = mpelm_loglik(m, fit.objective);
  fit.V_mpelm = asymptotic_variance_mpelm(fit);
  return fit;
}

inline MpelmFit fit_mpelm(const Eigen::MatrixXd& Xtil, const Eigen::MatrixXd& Ytil,
                          int u) {
  SampleMoments m = sample_moments(Xtil, Ytil);
  return fit_mpelm_from_moments(m, Xtil.colwise().mean().transpose(),
                                Ytil.colwise().mean().transpose(), u);
}

struct BicRow {
  int u = 0;
  double loglik = 0.0;
  int params = 0;
  double bic = 0.0;
  bool ok = true;
  std::string note;
};

struct SelectDimResult {
  int u_hat = 0;
  MpelmFit fit;
  std::vector<BicRow> rows;
};

inline int mpelm_param_count(int u, int p, int r) {
  return r + u * r + p * (p + 1) / 2 + r * (r + 1) / 2;
}

inline int default_u_max(int m_x, int n) { return std::min({m_x, n - 2, 20}); }

// BIC scan over u = 0..u_max. Each fit at u+1 receives warm-start candidates
// extending the previous Gamma by eigenvectors of the previous Delta0, which
// keeps the profile log-likelihood nondecreasing in u.
inline SelectDimResult select_dim_bic(const Eigen::MatrixXd& Xtil,
                                      const Eigen::MatrixXd& Ytil, int u_max = -1) {
  SampleMoments m = sample_moments(Xtil, Ytil);
  const int p = m.m_x(), r = m.m_y();
  if (u_max < 0) u_max = default_u_max(p, m.n);
  if (u_max < 1 || u_max > p) throw InvalidArgument("select_dim_bic: u_max out of range");

  Eigen::VectorXd xm = Xtil.colwise().mean().transpose();
  Eigen::VectorXd ym = Ytil.colwise().mean().transpose();

  SelectDimResult out;
  double best_bic = std::numeric_limits<double>::infinity();
  bool have_prev = false;
  MpelmFit prev;
  for (int u = 0; u <= u_max; ++u) {
    BicRow row;
    row.u = u;
    row.params = mpelm_param_count(u, p, r);
    try {
      std::vector<Eigen::MatrixXd> warm;
      if (have_prev && prev.u + 1 == u && prev.Gamma.allFinite()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prev.Delta0);
        for (int j = static_cast<int>(es.eigenvalues().size()) - 1; j >= 0; --j) {
          Eigen::MatrixXd G(p, u);
          G.leftCols(u - 1) = prev.Gamma;
          G.col(u - 1) = prev.Gamma0 * es.eigenvectors().col(j);
          warm.push_back(G);
        }
      }
      MpelmFit fit = fit_mpelm_from_moments(m, xm, ym, u, warm);
      row.loglik = fit.loglik;
      row.bic = -2.0 * fit.loglik + std::log(double(m.n)) * row.params;
      if (row.bic < best_bic) {
        best_bic = row.bic;
        out.u_hat = u;
        out.fit = fit;
      }
      prev = std::move(fit);
      have_prev = true;
    } catch (const Error& e) {
      row.ok = false;
      row.note = e.what();
    }
    out.rows.push_back(row);
  }
  if (!std::isfinite(best_bic))
    throw NumericalError("select_dim_bic: every candidate dimension failed");
  return out;
}

}  // namespace fepls
