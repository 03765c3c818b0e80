// Linear baselines (least squares, SIMPLS partial least squares, principal
// component regression), prediction-error metrics, and cross-validation
// fold machinery.

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "fepls/baselines.hpp"
#include "fepls/rng.hpp"

using namespace fepls;

namespace {

void draw_linear(int n, int p, int r, Rng& rng, double noise, Eigen::MatrixXd& X,
                 Eigen::MatrixXd& Y, Eigen::MatrixXd& beta) {
  X.resize(n, p);
  beta.resize(r, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < p; ++j) beta(i, j) = rng.normal();
  Y = X * beta.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < r; ++j) Y(i, j) += noise * rng.normal();
}

}  // namespace

TEST(Ols, ExactOnNoiselessData) {
  Rng rng(71);
  Eigen::MatrixXd X, Y, beta;
  draw_linear(60, 4, 2, rng, 0.0, X, Y, beta);
  Y.array() += 1.5;  // constant shift absorbed by the intercept
  LinearFit fit = fit_ols(X, Y);
  EXPECT_LT((fit.beta - beta).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((fit.intercept.array() - 1.5).abs().maxCoeff(), 1e-9);
  EXPECT_LT(mspe(predict_linear(fit, X), Y), 1e-18);
}

TEST(Simpls, FullComponentCountEqualsLeastSquares) {
  Rng rng(72);
  Eigen::MatrixXd X, Y, beta;
  draw_linear(80, 5, 3, rng, 0.3, X, Y, beta);
  LinearFit pls = fit_simpls(X, Y, 5);
  LinearFit ols = fit_ols(X, Y);
  EXPECT_LT((pls.beta - ols.beta).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((pls.intercept - ols.intercept).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Simpls, WeightsAreCovarianceOrthogonal) {
  Rng rng(73);
  Eigen::MatrixXd X, Y, beta;
  draw_linear(120, 6, 2, rng, 0.5, X, Y, beta);
  SampleMoments m = sample_moments(X, Y);
  Eigen::MatrixXd W = simpls_weights(m.SX, m.SXY, 4);
  ASSERT_EQ(W.cols(), 4);
  Eigen::MatrixXd G = W.transpose() * m.SX * W;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) EXPECT_LT(std::abs(G(i, j)), 1e-8 * std::sqrt(G(i, i) * G(j, j)));
}

TEST(Simpls, StopsDeflationOnRankDeficientCrossCovariance) {
  // orthogonal design (sign columns of a 4x4 Hadamard matrix, replicated):
  // the sample covariance is exactly the identity, so a single-column
  // response deflates the cross-covariance to zero after one component
  Eigen::MatrixXd H(4, 3);
  H << 1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, 1;
  Eigen::MatrixXd X(20, 3);
  for (int r = 0; r < 5; ++r) X.middleRows(4 * r, 4) = H;
  Eigen::MatrixXd Y = X.col(0);
  LinearFit fit = fit_simpls(X, Y, 3);
  EXPECT_TRUE(fit.deflation_stopped_early);
  EXPECT_EQ(fit.components, 1);
  // the single component already reproduces the response exactly
  EXPECT_LT(mspe(predict_linear(fit, X), Y), 1e-18);
}

TEST(Pcr, FullComponentCountEqualsLeastSquares) {
  Rng rng(75);
  Eigen::MatrixXd X, Y, beta;
  draw_linear(90, 5, 2, rng, 0.4, X, Y, beta);
  LinearFit pcr = fit_pcr(X, Y, 5);
  LinearFit ols = fit_ols(X, Y);
  EXPECT_LT((pcr.beta - ols.beta).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pcr, KeepsDominantVarianceDirections) {
  // X has one dominant direction carrying the signal; 1-component PCR
  // captures it and nearly matches the full fit
  Rng rng(76);
  const int n = 400;
  Eigen::MatrixXd X(n, 3);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 10.0 * rng.normal();
    X(i, 1) = 0.3 * rng.normal();
    X(i, 2) = 0.3 * rng.normal();
  }
  Eigen::MatrixXd Y = 2.0 * X.col(0);
  LinearFit pcr1 = fit_pcr(X, Y, 1);
  EXPECT_NEAR(pcr1.beta(0, 0), 2.0, 1e-2);
  EXPECT_LT(std::abs(pcr1.beta(0, 1)), 1e-2);
}

TEST(Metrics, ZeroPredictionGivesSecondMoment) {
  Eigen::MatrixXd Y(2, 2);
  Y << 1, 2, 3, 4;
  EXPECT_NEAR(mspe(Eigen::MatrixXd::Zero(2, 2), Y), (1. + 4. + 9. + 16.) / 4.0, 1e-14);
}

TEST(Metrics, MisclassificationCountsDisagreements) {
  Eigen::VectorXi a(4), b(4);
  a << 0, 1, 1, 0;
  b << 0, 1, 0, 1;
  EXPECT_NEAR(misclassification(a, b), 0.5, 1e-15);
  EXPECT_THROW(misclassification(a, Eigen::VectorXi::Zero(3)), InvalidArgument);
}

TEST(Kfold, PartitionsAllIndicesEvenly) {
  auto folds = kfold_indices(23, 5, 99);
  ASSERT_EQ(folds.size(), 5u);
  std::vector<int> seen;
  for (const auto& f : folds) {
    EXPECT_GE(f.size(), 4u);
    EXPECT_LE(f.size(), 5u);
    seen.insert(seen.end(), f.begin(), f.end());
  }
  std::sort(seen.begin(), seen.end());
  ASSERT_EQ(seen.size(), 23u);
  for (int i = 0; i < 23; ++i) EXPECT_EQ(seen[i], i);
}

TEST(Kfold, DeterministicGivenSeed) {
  EXPECT_EQ(kfold_indices(40, 5, 7), kfold_indices(40, 5, 7));
  EXPECT_NE(kfold_indices(40, 5, 7), kfold_indices(40, 5, 8));
}

TEST(Kfold, CvScoresExactFitAsZero) {
  // noiseless linear data: held-out error of the true-dimension fit is zero,
  // while a 1-component fit of a rank-2 signal is not
  Rng rng(77);
  Eigen::MatrixXd X, Y, beta;
  draw_linear(100, 4, 2, rng, 0.0, X, Y, beta);
  auto score = kfold_cv(100, 5, 13, 4, [&](const std::vector<int>& train,
                                           const std::vector<int>& test, int cand) {
    LinearFit f = fit_simpls(take_rows(X, train), take_rows(Y, train), cand + 1);
    return mspe(predict_linear(f, take_rows(X, test)), take_rows(Y, test));
  });
  ASSERT_EQ(score.size(), 4u);
  EXPECT_GT(score[0], 1e-6);
  EXPECT_LT(score[3], 1e-12);
}

TEST(TakeRows, SelectsInOrder) {
  Eigen::MatrixXd M(3, 2);
  M << 1, 2, 3, 4, 5, 6;
  Eigen::MatrixXd R = take_rows(M, {2, 0});
  EXPECT_EQ(R(0, 0), 5);
  EXPECT_EQ(R(1, 1), 2);
}
