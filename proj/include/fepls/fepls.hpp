#pragma once

// Function-level regression API: fit on a FunctionalDataset, predict response
// curves on a grid, and produce pointwise confidence/prediction intervals.
// All model quantities live in orthonormalized basis coordinates.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fepls/baselines.hpp"
#include "fepls/basis.hpp"
#include "fepls/coords.hpp"
#include "fepls/dataset.hpp"
#include "fepls/envelope.hpp"
#include "fepls/errors.hpp"
#include "fepls/genv.hpp"
#include "fepls/linalg.hpp"
#include "fepls/moments.hpp"

namespace fepls {

// Inverse standard normal CDF: Acklam's rational approximation polished by a
// single Halley step through erfc, giving near machine precision.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidArgument("normal_quantile: p must lie strictly in (0,1)");
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= phigh) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

struct FeplsModel {
  std::vector<BasisSet> bases_x;  // orthonormalized
  BasisSet basis_y;               // orthonormalized
  ProjectionMethod method;
  std::vector<int> block_offsets;
  MpelmFit fit;
  Eigen::MatrixXd Sigma_Ytil;    // coordinate covariance of the response
  Eigen::MatrixXd Sigma_epstil;  // residual coordinate covariance, PSD-clipped
  Eigen::Index n = 0;
  std::vector<BicRow> bic_rows;  // filled when the dimension was selected
};

struct GfeplsModel {
  std::vector<BasisSet> bases_x;
  ProjectionMethod method;
  std::vector<int> block_offsets;
  GmelmFit fit;
  Eigen::Index n = 0;
  std::vector<BicRow> bic_rows;
};

// Coordinates of new predictor curves under a fitted model's bases.
inline Eigen::MatrixXd project_new_predictors(const std::vector<BasisSet>& bases_x,
                                              const ProjectionMethod& method,
                                              const std::vector<PredictorBlock>& preds) {
  if (preds.size() != bases_x.size())
    throw InvalidArgument("project_new_predictors: one block per fitted predictor required");
  int n = preds.empty() ? 0 : preds[0].n();
  int m_x = 0;
  for (const auto& b : bases_x) m_x += b.m;
  Eigen::MatrixXd X(n, m_x);
  int off = 0;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    if (preds[j].n() != n)
      throw DataError("project_new_predictors: predictor blocks disagree on n");
    X.middleCols(off, bases_x[j].m) =
        detail::project_block(preds[j], bases_x[j], method, j);
    off += bases_x[j].m;
  }
  return X;
}

// Fit the envelope regression of a functional response on functional
// predictors. u < 0 selects the dimension by BIC. Bases are orthonormalized
// here if the caller has not already done so.
inline FeplsModel fit_fepls(const FunctionalDataset& data,
                            std::vector<BasisSet> bases_x, BasisSet basis_y, int u = -1,
                            const ProjectionMethod& method = ProjectionMethod::ols()) {
  if (data.response_type != ResponseType::functional)
    throw InvalidArgument(
        "fit_fepls: response must be functional (use fit_gfepls for binary labels)");
  for (auto& b : bases_x)
    if (!b.orthonormalized) b = orthonormalize(b);
  if (!basis_y.orthonormalized) basis_y = orthonormalize(basis_y);

  CoordinateBlock cb = project_dataset(data, bases_x, basis_y, method);

  FeplsModel mdl;
  mdl.bases_x = bases_x;
  mdl.basis_y = basis_y;
  mdl.method = method;
  mdl.block_offsets = cb.block_offsets;
  mdl.n = cb.n();
  if (u < 0) {
    SelectDimResult sel = select_dim_bic(cb.Xtil, cb.Ytil);
    mdl.fit = sel.fit;
    mdl.bic_rows = sel.rows;
  } else {
    mdl.fit = fit_mpelm(cb.Xtil, cb.Ytil, u);
  }
  SampleMoments m = sample_moments(cb.Xtil, cb.Ytil);
  mdl.Sigma_Ytil = m.SY;
  mdl.Sigma_epstil = clip_psd(mdl.fit.Sigma_eps);
  return mdl;
}

// Fitted response coordinates for new predictor coordinates.
inline Eigen::MatrixXd predict_coords(const FeplsModel& mdl, const Eigen::MatrixXd& Xtil_new) {
  if (Xtil_new.cols() != mdl.fit.beta.cols())
    throw InvalidArgument("predict_coords: coordinate width mismatch");
  Eigen::MatrixXd Xc = Xtil_new.rowwise() - mdl.fit.x_mean.transpose();
  Eigen::MatrixXd Yhat = Xc * mdl.fit.beta.transpose();
  Yhat.rowwise() += mdl.fit.y_mean.transpose();
  return Yhat;
}

// Predicted response curves evaluated on `grid` (one row per new subject).
inline Eigen::MatrixXd predict_function(const FeplsModel& mdl,
                                        const std::vector<PredictorBlock>& preds,
                                        const Eigen::VectorXd& grid) {
  Eigen::MatrixXd Xnew = project_new_predictors(mdl.bases_x, mdl.method, preds);
  return reconstruct_rows(predict_coords(mdl, Xnew), mdl.basis_y, grid);
}

struct IntervalEstimate {
  double t0 = 0.0;
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  std::string kind;  // "confidence" or "prediction"
};

namespace detail {

inline IntervalEstimate interval_impl(const FeplsModel& mdl,
                                      const Eigen::VectorXd& xtil_new, double t0,
                                      double level, bool prediction) {
  if (!(level > 0.0 && level < 1.0))
    throw InvalidArgument("interval: level must lie strictly in (0,1)");
  if (xtil_new.size() != mdl.fit.beta.cols())
    throw InvalidArgument("interval: coordinate length mismatch");
  const int m_y = static_cast<int>(mdl.fit.beta.rows());
  Eigen::VectorXd grid1(1);
  grid1(0) = t0;
  Eigen::VectorXd c = evaluate(mdl.basis_y, grid1).row(0).transpose();

  Eigen::VectorXd xc = xtil_new - mdl.fit.x_mean;
  Eigen::VectorXd mu = mdl.fit.y_mean + mdl.fit.beta * xc;

  // var(point estimate) = c' [ S_eps + (xc' (x) I) V (xc (x) I) ] c / n where V
  // is the asymptotic covariance of the vectorized coefficient matrix. The
  // intercept contribution is the residual covariance, not the marginal
  // response covariance: the point estimate centers the new coordinates at the
  // training mean, so ybar - beta*xbar estimates the intercept with variance
  // S_eps/n (the signal component of ybar's fluctuation cancels).
  Eigen::MatrixXd J = kron(xc.transpose(), Eigen::MatrixXd::Identity(m_y, m_y));
  Eigen::MatrixXd mid = mdl.Sigma_epstil + J * mdl.fit.V_mpelm * J.transpose();
  double var = c.dot(mid * c) / static_cast<double>(mdl.n);
  if (prediction) var += c.dot(mdl.Sigma_epstil * c);
  var = std::max(var, 0.0);

  IntervalEstimate est;
  est.t0 = t0;
  est.point = c.dot(mu);
  est.level = level;
  est.kind = prediction ? "prediction" : "confidence";
  double z = normal_quantile(0.5 + 0.5 * level);
  double half = z * std::sqrt(var);
  est.lower = est.point - half;
  est.upper = est.point + half;
  return est;
}

}  // namespace detail

// Interval for the conditional mean response at time t0 given one new
// predictor observation (as projected coordinates).
inline IntervalEstimate confidence_interval(const FeplsModel& mdl,
                                            const Eigen::VectorXd& xtil_new, double t0,
                                            double level = 0.95) {
  return detail::interval_impl(mdl, xtil_new, t0, level, false);
}

// Interval for a new response value at t0 (adds the residual variance term).
inline IntervalEstimate prediction_interval(const FeplsModel& mdl,
                                            const Eigen::VectorXd& xtil_new, double t0,
                                            double level = 0.95) {
  return detail::interval_impl(mdl, xtil_new, t0, level, true);
}

// Logistic counterpart: binary labels on functional predictors.
inline GfeplsModel fit_gfepls(const FunctionalDataset& data,
                              std::vector<BasisSet> bases_x, int u = -1,
                              const ProjectionMethod& method = ProjectionMethod::ols()) {
  if (data.response_type != ResponseType::binary)
    throw InvalidArgument("fit_gfepls: response must be binary labels");
  for (auto& b : bases_x)
    if (!b.orthonormalized) b = orthonormalize(b);
  CoordinateBlock cb = project_dataset(data, bases_x, std::nullopt, method);

  GfeplsModel mdl;
  mdl.bases_x = bases_x;
  mdl.method = method;
  mdl.block_offsets = cb.block_offsets;
  mdl.n = cb.n();
  if (u < 0) {
    GmelmSelectResult sel = select_dim_bic_gmelm(cb.Xtil, cb.labels);
    mdl.fit = sel.fit;
    mdl.bic_rows = sel.rows;
  } else {
    mdl.fit = fit_gmelm(cb.Xtil, cb.labels, u);
  }
  return mdl;
}

inline Eigen::VectorXd predict_prob_coords(const GfeplsModel& mdl,
                                           const Eigen::MatrixXd& Xtil_new) {
  if (Xtil_new.cols() != mdl.fit.beta.size())
    throw InvalidArgument("predict_prob: coordinate width mismatch");
  Eigen::VectorXd zeta = (Xtil_new * mdl.fit.beta).array() + mdl.fit.alpha;
  Eigen::VectorXd p(zeta.size());
  for (Eigen::Index i = 0; i < zeta.size(); ++i) p(i) = sigmoid(zeta(i));
  return p;
}

inline Eigen::VectorXd predict_prob(const GfeplsModel& mdl,
                                    const std::vector<PredictorBlock>& preds) {
  return predict_prob_coords(mdl, project_new_predictors(mdl.bases_x, mdl.method, preds));
}

inline Eigen::VectorXi classify(const GfeplsModel& mdl,
                                const std::vector<PredictorBlock>& preds,
                                double threshold = 0.5) {
  Eigen::VectorXd p = predict_prob(mdl, preds);
  Eigen::VectorXi lab(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) lab(i) = p(i) >= threshold ? 1 : 0;
  return lab;
}

// Reference linear methods (OLS / PCR / PLS) wrapped at the function level so
// the CLI can fit, persist, and predict with them through one code path.
struct BaselineLinearModel {
  std::string method;  // "ols", "pcr", or "pls"
  std::vector<BasisSet> bases_x;
  BasisSet basis_y;
  ProjectionMethod projection;
  std::vector<int> block_offsets;
  LinearFit fit;
  Eigen::Index n = 0;
};

inline BaselineLinearModel fit_baseline(const FunctionalDataset& data,
                                        std::vector<BasisSet> bases_x, BasisSet basis_y,
                                        const std::string& method, int components,
                                        const ProjectionMethod& pm = ProjectionMethod::ols()) {
  if (data.response_type != ResponseType::functional)
    throw InvalidArgument("fit_baseline: response must be functional");
  for (auto& b : bases_x)
    if (!b.orthonormalized) b = orthonormalize(b);
  if (!basis_y.orthonormalized) basis_y = orthonormalize(basis_y);
  CoordinateBlock cb = project_dataset(data, bases_x, basis_y, pm);

  BaselineLinearModel mdl;
  mdl.method = method;
  mdl.bases_x = bases_x;
  mdl.basis_y = basis_y;
  mdl.projection = pm;
  mdl.block_offsets = cb.block_offsets;
  mdl.n = cb.n();
  if (method == "ols")
    mdl.fit = fit_ols(cb.Xtil, cb.Ytil);
  else if (method == "pcr")
    mdl.fit = fit_pcr(cb.Xtil, cb.Ytil, components);
  else if (method == "pls")
    mdl.fit = fit_simpls(cb.Xtil, cb.Ytil, components);
  else
    throw InvalidArgument("fit_baseline: unknown method '" + method + "'");
  return mdl;
}

inline Eigen::MatrixXd predict_function(const BaselineLinearModel& mdl,
                                        const std::vector<PredictorBlock>& preds,
                                        const Eigen::VectorXd& grid) {
  Eigen::MatrixXd Xnew = project_new_predictors(mdl.bases_x, mdl.projection, preds);
  return reconstruct_rows(predict_linear(mdl.fit, Xnew), mdl.basis_y, grid);
}

}  // namespace fepls
