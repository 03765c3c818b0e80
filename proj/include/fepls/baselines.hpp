#pragma once

#include <Eigen/Dense>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "fepls/errors.hpp"
#include "fepls/linalg.hpp"
#include "fepls/moments.hpp"
#include "fepls/rng.hpp"

namespace fepls {

// Reference linear estimator on coordinates.
struct LinearFit {
  std::string method;          // "ols" | "pcr" | "pls"
  int components = 0;          // retained directions (pcr/pls)
  Eigen::MatrixXd beta;        // m_y x m_x
  Eigen::VectorXd intercept;   // m_y
  Eigen::MatrixXd directions;  // m_x x components
  bool deflation_stopped_early = false;
};

inline Eigen::MatrixXd predict_linear(const LinearFit& fit, const Eigen::MatrixXd& Xnew) {
  return (Xnew * fit.beta.transpose()).rowwise() + fit.intercept.transpose();
}

inline LinearFit fit_ols(const Eigen::MatrixXd& Xtil, const Eigen::MatrixXd& Ytil) {
  SampleMoments m = sample_moments(Xtil, Ytil);
  Eigen::LLT<Eigen::MatrixXd> llt(m.SX);
  if (llt.info() != Eigen::Success)
    throw NumericalError("fit_ols: singular predictor covariance");
  LinearFit fit;
  fit.method = "ols";
  fit.components = m.m_x();
  fit.beta = llt.solve(m.SXY).transpose();  // S_XY' S_X^{-1}
  fit.intercept = Ytil.colwise().mean().transpose() -
                  fit.beta * Xtil.colwise().mean().transpose();
  return fit;
}

namespace detail {

// Deterministic sign: flip so the largest-magnitude coordinate is positive.
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v(imax) < 0.0) v = -v;
}

}  // namespace detail

// SIMPLS weight vectors: w_{k+1} maximizes w'S_XY S_XY'w subject to w'w = 1
// and w'S_X W_k = 0, computed by de Jong's deflation of S_XY against an
// orthonormal basis of {S_X w_1, ..., S_X w_k}.
inline Eigen::MatrixXd simpls_weights(const Eigen::MatrixXd& SX,
                                      const Eigen::MatrixXd& SXY, int u,
                                      bool* stopped_early = nullptr) {
  const int p = static_cast<int>(SX.rows());
  if (u < 1 || u > p) throw InvalidArgument("simpls_weights: u out of range");
  Eigen::MatrixXd S = SXY;
  // zero-initialized so a fully deflated (or zero) SXY yields a well-defined
  // degenerate weight matrix instead of uninitialized storage
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p, u);
  Eigen::MatrixXd Vbasis = Eigen::MatrixXd::Zero(p, u);
  int got = 0;
  for (int j = 0; j < u; ++j) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeThinU);
    if (svd.singularValues()(0) < 1e-12 * (1.0 + SXY.norm())) break;  // deflated away
    Eigen::VectorXd w = svd.matrixU().col(0);
    detail::fix_sign(w);
    W.col(j) = w;
    Eigen::VectorXd pj = SX * w;
    for (int i = 0; i < j; ++i) pj -= Vbasis.col(i).dot(pj) * Vbasis.col(i);
    double nv = pj.norm();
    if (nv < 1e-12) break;
    Vbasis.col(j) = pj / nv;
    S -= Vbasis.col(j) * (Vbasis.col(j).transpose() * S);
    ++got;
  }
  if (stopped_early) *stopped_early = (got < u);
  return W.leftCols(std::max(got, 1));
}

inline LinearFit fit_simpls(const Eigen::MatrixXd& Xtil, const Eigen::MatrixXd& Ytil,
                            int u) {
  SampleMoments m = sample_moments(Xtil, Ytil);
  LinearFit fit;
  fit.method = "pls";
  fit.directions = simpls_weights(m.SX, m.SXY, u, &fit.deflation_stopped_early);
  fit.components = static_cast<int>(fit.directions.cols());
  const Eigen::MatrixXd& W = fit.directions;
  Eigen::MatrixXd WSW = sym(W.transpose() * m.SX * W);
  fit.beta = (W * solve_spd(WSW, W.transpose() * m.SXY)).transpose();
  fit.intercept = Ytil.colwise().mean().transpose() -
                  fit.beta * Xtil.colwise().mean().transpose();
  return fit;
}

// Regression on the top-k eigenvectors of S_X (descending eigenvalues,
// largest-magnitude coordinate of each eigenvector positive).
inline LinearFit fit_pcr(const Eigen::MatrixXd& Xtil, const Eigen::MatrixXd& Ytil,
                         int k) {
  SampleMoments m = sample_moments(Xtil, Ytil);
  const int p = m.m_x();
  if (k < 1 || k > p) throw InvalidArgument("fit_pcr: k out of range");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.SX);
  if (es.info() != Eigen::Success) throw NumericalError("fit_pcr: eigensolver failed");
  LinearFit fit;
  fit.method = "pcr";
  fit.components = k;
  fit.directions.resize(p, k);
  Eigen::VectorXd lam(k);
  for (int j = 0; j < k; ++j) {  // Eigen sorts ascending; take from the top
    fit.directions.col(j) = es.eigenvectors().col(p - 1 - j);
    detail::fix_sign(fit.directions.col(j));
    lam(j) = es.eigenvalues()(p - 1 - j);
    if (!(lam(j) > 0.0))
      throw NumericalError("fit_pcr: nonpositive eigenvalue among retained components");
  }
  fit.beta = (fit.directions * lam.cwiseInverse().asDiagonal() *
              (fit.directions.transpose() * m.SXY))
                 .transpose();
  fit.intercept = Ytil.colwise().mean().transpose() -
                  fit.beta * Xtil.colwise().mean().transpose();
  return fit;
}

// Mean squared difference over all (subject, point) pairs.
inline double mspe(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& actual) {
  if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols())
    throw InvalidArgument("mspe: shape mismatch");
  if (predicted.size() == 0) throw InvalidArgument("mspe: empty input");
  return (predicted - actual).squaredNorm() / static_cast<double>(predicted.size());
}

inline double misclassification(const Eigen::VectorXi& predicted,
                                const Eigen::VectorXi& labels) {
  if (predicted.size() != labels.size())
    throw InvalidArgument("misclassification: length mismatch");
  if (predicted.size() == 0) throw InvalidArgument("misclassification: empty input");
  int miss = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (predicted(i) != labels(i)) ++miss;
  return static_cast<double>(miss) / static_cast<double>(labels.size());
}

// Deterministic fold assignment: seeded shuffle of 0..n-1 dealt round-robin.
inline std::vector<std::vector<int>> kfold_indices(int n, int folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidArgument("kfold: need at least 2 folds");
  if (folds > n) throw InvalidArgument("kfold: more folds than observations");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  std::vector<std::vector<int>> out(folds);
  for (int i = 0; i < n; ++i) out[i % folds].push_back(idx[i]);
  return out;
}

// Mean held-out metric per candidate parameter. `fit_and_score` receives the
// train/test row indices and the candidate index and returns the metric on
// the held-out fold.
inline std::vector<double> kfold_cv(
    int n, int folds, std::uint64_t seed, int n_candidates,
    const std::function<double(const std::vector<int>&, const std::vector<int>&, int)>&
        fit_and_score) {
  auto fold_idx = kfold_indices(n, folds, seed);
  std::vector<double> mean_metric(n_candidates, 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train;
    train.reserve(n);
    for (int g = 0; g < folds; ++g)
      if (g != f) train.insert(train.end(), fold_idx[g].begin(), fold_idx[g].end());
    for (int c = 0; c < n_candidates; ++c)
      mean_metric[c] += fit_and_score(train, fold_idx[f], c) / folds;
  }
  return mean_metric;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& M, const std::vector<int>& rows) {
  Eigen::MatrixXd out(rows.size(), M.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = M.row(rows[i]);
  return out;
}

inline Eigen::VectorXi take_rows(const Eigen::VectorXi& v, const std::vector<int>& rows) {
  Eigen::VectorXi out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out(i) = v(rows[i]);
  return out;
}

}  // namespace fepls
