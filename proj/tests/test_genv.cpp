// Logistic regression (IRLS) and the logistic predictor-envelope fit:
// stable link functions, maximum-likelihood recovery, the deviance term's
// analytic row gradient, exact equivalence with plain logistic regression
// at full dimension, envelope recovery, and BIC dimension selection.

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "fepls/genv.hpp"
#include "fepls/glm.hpp"
#include "fepls/rng.hpp"

using namespace fepls;

namespace {

// Binary instance with a known 2-dimensional envelope in 6 coordinates.
struct SyntheticLogit {
  Eigen::MatrixXd Phi;   // 6 x 2
  Eigen::VectorXd eta;   // 2
  Eigen::VectorXd beta;  // 6
  double alpha = 0.25;
  Eigen::MatrixXd SX, Lx;
};

SyntheticLogit make_logit() {
  SyntheticLogit s;
  Eigen::MatrixXd raw(6, 2);
  raw << 1, 0, 1, 1, -1, 1, 0, -1, 0.5, 0.5, 0, 0;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  s.Phi = Eigen::MatrixXd(qr.householderQ()) * Eigen::MatrixXd::Identity(6, 2);
  Eigen::MatrixXd Phi0 = orthonormal_complement(s.Phi);
  Eigen::VectorXd dl(2), d0(4);
  dl << 3.0, 1.5;
  d0 << 2.0, 1.0, 0.6, 0.3;
  s.SX = sym(s.Phi * dl.asDiagonal() * s.Phi.transpose() +
             Phi0 * d0.asDiagonal() * Phi0.transpose());
  s.Lx = Eigen::LLT<Eigen::MatrixXd>(s.SX).matrixL();
  s.eta.resize(2);
  s.eta << 1.1, -0.7;
  s.beta = s.Phi * s.eta;
  return s;
}

void draw(const SyntheticLogit& s, int n, Rng& rng, Eigen::MatrixXd& X,
          Eigen::VectorXi& y) {
  X.resize(n, 6);
  y.resize(n);
  Eigen::VectorXd z(6);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 6; ++j) z(j) = rng.normal();
    X.row(i) = (s.Lx * z).transpose();
    double p = sigmoid(s.alpha + X.row(i).dot(s.beta));
    y(i) = rng.uniform() < p ? 1 : 0;
  }
}

}  // namespace

TEST(Link, SigmoidIsStableAtExtremes) {
  EXPECT_EQ(sigmoid(800.0), 1.0);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-15);
  EXPECT_FALSE(std::isnan(sigmoid(-1e8)));
}

TEST(Link, Log1pexpIsStable) {
  EXPECT_NEAR(log1pexp(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(log1pexp(800.0), 800.0, 1e-12);
  EXPECT_NEAR(log1pexp(-40.0), std::exp(-40.0), 1e-25);
}

TEST(Irls, NullModelFindsBaseRate) {
  Rng rng(31);
  const int n = 4000;
  Eigen::MatrixXd Z(n, 3);
  Eigen::VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) Z(i, j) = rng.normal();
    y(i) = rng.bernoulli(0.3);
  }
  GlmFit fit = irls_logistic(Z, y);
  EXPECT_TRUE(fit.converged);
  EXPECT_LT(fit.coef.norm(), 0.1);
  EXPECT_NEAR(fit.alpha, std::log(0.3 / 0.7), 0.1);
}

TEST(Irls, RecoversKnownCoefficient) {
  Rng rng(32);
  const int n = 100000;
  Eigen::MatrixXd Z(n, 1);
  Eigen::VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    Z(i, 0) = rng.normal();
    y(i) = rng.uniform() < sigmoid(-0.5 + 2.0 * Z(i, 0)) ? 1 : 0;
  }
  GlmFit fit = irls_logistic(Z, y);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.coef(0), 2.0, 0.05);
  EXPECT_NEAR(fit.alpha, -0.5, 0.05);
}

TEST(Irls, ScoreVanishesAtSolution) {
  Rng rng(33);
  const int n = 500;
  Eigen::MatrixXd Z(n, 2);
  Eigen::VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    Z(i, 0) = rng.normal();
    Z(i, 1) = rng.normal();
    y(i) = rng.uniform() < sigmoid(0.3 * Z(i, 0) - 0.6 * Z(i, 1)) ? 1 : 0;
  }
  GlmFit fit = irls_logistic(Z, y);
  ASSERT_TRUE(fit.converged);
  Eigen::VectorXd resid(n);
  for (int i = 0; i < n; ++i)
    resid(i) = y(i) - sigmoid(fit.alpha + Z.row(i).dot(fit.coef));
  EXPECT_LT(std::abs(resid.mean()), 1e-8);
  EXPECT_LT((Z.transpose() * resid / n).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Irls, FlagsSeparationAndCapsCoefficients) {
  Eigen::MatrixXd Z(6, 1);
  Z << -3, -2, -1, 1, 2, 3;
  Eigen::VectorXi y(6);
  y << 0, 0, 0, 1, 1, 1;  // perfectly separated
  GlmFit fit = irls_logistic(Z, y);
  EXPECT_TRUE(fit.separation);
  EXPECT_LE(fit.coef.cwiseAbs().maxCoeff(), 30.0 + 1e-9);
}

TEST(GmelmObjective, NullFitOnBalancedDataIsTwoLogTwo) {
  Eigen::MatrixXd X(4, 3);
  X << 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1;
  Eigen::VectorXi y(4);
  y << 0, 1, 0, 1;
  double v = gmelm_objective(0.0, Eigen::VectorXd(), Eigen::MatrixXd(3, 0), X, y);
  EXPECT_NEAR(v, 2.0 * std::log(2.0), 1e-14);
}

TEST(GmelmObjective, RejectsNonSemiorthogonalGamma) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(10, 3);
  Eigen::VectorXi y = Eigen::VectorXi::Zero(10);
  Eigen::MatrixXd G = 2.0 * Eigen::MatrixXd::Identity(3, 1);
  Eigen::VectorXd eta(1);
  eta << 1.0;
  EXPECT_THROW(gmelm_objective(0.0, eta, G, X, y), InvalidArgument);
}

TEST(DevianceTerm, RowGradientMatchesFiniteDifferences) {
  Rng rng(44);
  const int n = 300, p = 5, u = 2;
  Eigen::MatrixXd Xc(n, p);
  Eigen::VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) Xc(i, j) = rng.normal();
    y(i) = rng.bernoulli(0.5);
  }
  LogisticDevianceTerm term(Xc, y);
  Eigen::VectorXd eta(u);
  eta << 0.8, -0.4;
  term.set_glm(0.2, eta);

  Eigen::MatrixXd C(p, u);
  C << 1, 0, 0, 1, 0.3, -0.2, 0.5, 0.1, -0.4, 0.7;
  double worst = 0.0;
  for (int row = 2; row < p; ++row) {
    Eigen::VectorXd g;
    term.value_and_row_grad(C, row, g);
    const double h = 1e-6;
    for (int j = 0; j < u; ++j) {
      Eigen::MatrixXd Cp = C, Cm = C;
      Cp(row, j) += h;
      Cm(row, j) -= h;
      double fd = (term.value(Cp) - term.value(Cm)) / (2 * h);
      worst = std::max(worst, std::abs(g(j) - fd) / std::max(1e-3, std::abs(fd)));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Gmelm, FullDimensionEqualsLogisticMle) {
  SyntheticLogit s = make_logit();
  Rng rng(55);
  Eigen::MatrixXd X;
  Eigen::VectorXi y;
  draw(s, 600, rng, X, y);

  GmelmFit env = fit_gmelm(X, y, 6);
  GlmFit mle = irls_logistic(X, y);
  EXPECT_LT((env.beta - mle.coef).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(env.alpha, mle.alpha, 1e-6);
}

TEST(Gmelm, ZeroDimensionIsInterceptOnly) {
  SyntheticLogit s = make_logit();
  Rng rng(56);
  Eigen::MatrixXd X;
  Eigen::VectorXi y;
  draw(s, 300, rng, X, y);
  GmelmFit fit = fit_gmelm(X, y, 0);
  EXPECT_EQ(fit.beta.size(), 6);
  EXPECT_EQ(fit.beta.cwiseAbs().maxCoeff(), 0.0);
  double ybar = y.cast<double>().mean();
  EXPECT_NEAR(fit.alpha, std::log(ybar / (1.0 - ybar)), 1e-10);
}

TEST(Gmelm, RecoversEnvelopeDirectionsAtLargeSamples) {
  SyntheticLogit s = make_logit();
  Rng rng(57);
  Eigen::MatrixXd X;
  Eigen::VectorXi y;
  draw(s, 4000, rng, X, y);
  GmelmFit fit = fit_gmelm(X, y, 2);
  EXPECT_TRUE(fit.converged);
  EXPECT_EQ(fit.mono_violations, 0);
  EXPECT_LT(max_principal_angle(fit.Gamma, s.Phi), 0.2);
  EXPECT_LT((fit.beta - s.beta).cwiseAbs().maxCoeff(), 0.2);
}

TEST(Gmelm, ObjectiveNotWorseThanGlmSolutionAtTruth) {
  // the u=2 envelope optimum must score at least as well as the same
  // objective evaluated at the true subspace with its exact GLM refit
  SyntheticLogit s = make_logit();
  Rng rng(58);
  Eigen::MatrixXd X;
  Eigen::VectorXi y;
  draw(s, 800, rng, X, y);
  GmelmFit fit = fit_gmelm(X, y, 2, {s.Phi});
  GlmFit at_truth = glm_step(X, y, s.Phi);
  double obj_truth =
      gmelm_objective(at_truth.alpha, at_truth.coef, s.Phi, X, y);
  EXPECT_LE(fit.objective, obj_truth + 1e-8);
}

TEST(Gmelm, VarianceAtFullDimensionMatchesFisherInverse) {
  SyntheticLogit s = make_logit();
  Rng rng(59);
  Eigen::MatrixXd X;
  Eigen::VectorXi y;
  draw(s, 500, rng, X, y);
  GmelmFit env = fit_gmelm(X, y, 6);

  // direct Fisher information of the intercept-augmented logistic model
  const int n = 500;
  Eigen::MatrixXd Z(n, 7);
  Z.col(0).setOnes();
  Z.rightCols(6) = X;
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    double p = sigmoid(env.alpha + X.row(i).dot(env.beta));
    w(i) = p * (1.0 - p);
  }
  Eigen::MatrixXd I = Z.transpose() * w.asDiagonal() * Z / n;
  Eigen::MatrixXd Vt = inverse_spd(I).bottomRightCorner(6, 6);
  EXPECT_LT((env.V_gmelm - Vt).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Gmelm, EnvelopeVarianceNotLargerThanGlmVariance) {
  SyntheticLogit s = make_logit();
  Rng rng(60);
  Eigen::MatrixXd X;
  Eigen::VectorXi y;
  draw(s, 2000, rng, X, y);
  GmelmFit env = fit_gmelm(X, y, 2);
  GmelmFit full = fit_gmelm(X, y, 6);
  EXPECT_LE(env.V_gmelm.trace(), 1.2 * full.V_gmelm.trace());
}

TEST(GmelmBic, LoglikIsMonotoneAlongWarmStartPath) {
  SyntheticLogit s = make_logit();
  Rng rng(61);
  Eigen::MatrixXd X;
  Eigen::VectorXi y;
  draw(s, 400, rng, X, y);
  GmelmSelectResult sel = select_dim_bic_gmelm(X, y);
  ASSERT_EQ(sel.rows.size(), 7u);
  for (std::size_t i = 1; i < sel.rows.size(); ++i) {
    ASSERT_TRUE(sel.rows[i].ok) << sel.rows[i].note;
    EXPECT_GE(sel.rows[i].loglik, sel.rows[i - 1].loglik - 1e-6)
        << "dimension " << sel.rows[i].u;
  }
}

TEST(GmelmBic, FindsLowDimensionOnEnvelopeData) {
  SyntheticLogit s = make_logit();
  Rng rng(62);
  Eigen::MatrixXd X;
  Eigen::VectorXi y;
  draw(s, 3000, rng, X, y);
  GmelmSelectResult sel = select_dim_bic_gmelm(X, y);
  EXPECT_GE(sel.u_hat, 1);
  EXPECT_LE(sel.u_hat, 3);
  EXPECT_EQ(sel.fit.u, sel.u_hat);
}

TEST(GmelmBic, ParameterCountFormula) {
  EXPECT_EQ(gmelm_param_count(0, 6), 1 + 21);
  EXPECT_EQ(gmelm_param_count(2, 6), 1 + 2 + 21);
}
