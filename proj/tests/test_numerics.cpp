// Foundations: RNG reproducibility, quadrature, dense linear algebra
// helpers, the L-BFGS inner solver, CSV round trips, and the normal
// quantile used by interval construction.

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "fepls/csv.hpp"
#include "fepls/fepls.hpp"
#include "fepls/lbfgs.hpp"
#include "fepls/linalg.hpp"
#include "fepls/quadrature.hpp"
#include "fepls/rng.hpp"

using namespace fepls;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.raw(), b.raw());
}

TEST(Rng, StreamsDiffer) {
  Rng a = Rng::stream(7, 1);
  Rng b = Rng::stream(7, 2);
  int equal = 0;
  for (int i = 0; i < 64; ++i) equal += a.raw() == b.raw();
  EXPECT_EQ(equal, 0);
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    double v = r.uniform();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = r.normal();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(5);
  std::vector<int> v(37);
  for (int i = 0; i < 37; ++i) v[i] = i;
  r.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 37; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(v, sorted);  // astronomically unlikely to be identity
}

TEST(Quadrature, WeightsSumToOne) {
  for (int k : {2, 3, 101, 2001}) {
    QuadratureRule q = trapezoid_rule(k);
    EXPECT_NEAR(q.weights.sum(), 1.0, 1e-12);
  }
}

TEST(Quadrature, IntegratesLinearExactly) {
  QuadratureRule q = trapezoid_rule(101);
  double val = (q.weights.array() * (2.0 * q.nodes.array() + 1.0)).sum();
  EXPECT_NEAR(val, 2.0, 1e-12);
}

TEST(Quadrature, RejectsDegenerateRule) {
  EXPECT_THROW(trapezoid_rule(1), InvalidArgument);
}

TEST(Linalg, LogdetMatchesDirect) {
  Eigen::MatrixXd A(3, 3);
  A << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  EXPECT_NEAR(logdet_spd(A), std::log(A.determinant()), 1e-12);
  EXPECT_FALSE(try_logdet_spd(-A).has_value());
}

TEST(Linalg, SolveAndInverseAgree) {
  Eigen::MatrixXd A(3, 3);
  A << 5, 1, 2, 1, 4, 0, 2, 0, 3;
  Eigen::MatrixXd B = Eigen::MatrixXd::Random(3, 2);
  EXPECT_LT((solve_spd(A, B) - inverse_spd(A) * B).norm(), 1e-10);
}

TEST(Linalg, PinvRecoversInverseWhenFullRank) {
  Eigen::MatrixXd A(2, 2);
  A << 3, 1, 1, 2;
  EXPECT_LT((pinv_sym(A) - inverse_spd(A)).norm(), 1e-12);
}

TEST(Linalg, PinvDropsNullDirections) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
  A(0, 0) = 2.0;  // rank one
  Eigen::MatrixXd P = pinv_sym(A);
  EXPECT_NEAR(P(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(P.bottomRightCorner(2, 2).norm(), 0.0, 1e-12);
}

TEST(Linalg, SqrtAndInvSqrtConsistent) {
  Eigen::MatrixXd A(2, 2);
  A << 4, 1, 1, 3;
  Eigen::MatrixXd S = sqrt_spd(A);
  EXPECT_LT((S * S - A).norm(), 1e-10);
  EXPECT_LT((sqrt_spd(A) * inv_sqrt_spd(A) - Eigen::MatrixXd::Identity(2, 2)).norm(),
            1e-10);
}

TEST(Linalg, ComplementIsOrthonormalAndOrthogonal) {
  Eigen::MatrixXd G(4, 2);
  G << 1, 0, 0, 1, 0, 0, 0, 0;
  Eigen::MatrixXd G0 = orthonormal_complement(G);
  ASSERT_EQ(G0.cols(), 2);
  EXPECT_LT((G0.transpose() * G0 - Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-12);
  EXPECT_LT((G0.transpose() * G).norm(), 1e-12);
}

TEST(Linalg, PrincipalAnglesDetectSharedSpan) {
  Eigen::MatrixXd A(3, 1), B(3, 1);
  A << 1, 0, 0;
  B << 0.6, 0.8, 0;  // 53.13 degrees from A
  EXPECT_NEAR(principal_angles(A, A).maxCoeff(), 0.0, 1e-8);
  EXPECT_NEAR(principal_angles(A, B).maxCoeff(), std::acos(0.6), 1e-10);
}

TEST(Linalg, KroneckerShapeAndEntries) {
  Eigen::MatrixXd A(2, 2), B(2, 2);
  A << 1, 2, 3, 4;
  B << 0, 5, 6, 7;
  Eigen::MatrixXd K = kron(A, B);
  ASSERT_EQ(K.rows(), 4);
  EXPECT_DOUBLE_EQ(K(0, 1), 5.0);         // A(0,0)*B(0,1)
  EXPECT_DOUBLE_EQ(K(2, 3), 4.0 * 5.0);   // A(1,1)*B(0,1)
  EXPECT_DOUBLE_EQ(K(3, 0), 3.0 * 6.0);   // A(1,0)*B(1,0)
}

TEST(Linalg, LyapunovSolveSatisfiesEquation) {
  Eigen::MatrixXd S(3, 3);
  S << 3, 0.5, 0, 0.5, 2, 0.2, 0, 0.2, 1;
  Eigen::MatrixXd R = Eigen::MatrixXd::Random(3, 3);
  R = sym(R);
  Eigen::MatrixXd T = lyap_spd(S, R);
  EXPECT_LT((S * T + T * S - R).norm(), 1e-10);
}

TEST(Linalg, ClipPsdRemovesNegativeEigenvalues) {
  Eigen::MatrixXd A(2, 2);
  A << 1, 2, 2, 1;  // eigenvalues 3, -1
  Eigen::MatrixXd C = clip_psd(A);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  EXPECT_NEAR(es.eigenvalues().maxCoeff(), 3.0, 1e-10);
}

TEST(Lbfgs, SolvesQuadraticToGradientTolerance) {
  Eigen::MatrixXd A(3, 3);
  A << 4, 1, 0, 1, 5, 2, 0, 2, 6;
  Eigen::VectorXd b(3);
  b << 1, -2, 0.5;
  auto fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = A * x - b;
    return 0.5 * x.dot(A * x) - b.dot(x);
  };
  LbfgsResult r = lbfgs_minimize(fg, Eigen::VectorXd::Zero(3));
  EXPECT_TRUE(r.converged);
  EXPECT_LT((A * r.x - b).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Lbfgs, DescendsRosenbrock) {
  auto fg = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    g.resize(2);
    g(0) = -2.0 * a - 400.0 * x(0) * b;
    g(1) = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions opt;
  opt.max_iter = 500;
  LbfgsResult r = lbfgs_minimize(fg, x0, opt);
  EXPECT_LT(r.f, 1e-10);
  EXPECT_NEAR(r.x(0), 1.0, 1e-4);
}

TEST(Csv, MatrixRoundTripIsExact) {
  Eigen::MatrixXd M(2, 3);
  M << 1.0 / 3.0, -2.5e-17, 3.14159265358979312, 1e300, -0.0, 7;
  std::string path = std::filesystem::temp_directory_path() / "fepls_mat_rt.csv";
  write_matrix_csv(path, M, {"a", "b", "c"});
  Eigen::MatrixXd R = read_matrix_csv(path);
  ASSERT_EQ(R.rows(), 2);
  ASSERT_EQ(R.cols(), 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(R(i, j), M(i, j));
  std::remove(path.c_str());
}

TEST(Csv, FunctionalWideRoundTrip) {
  Eigen::VectorXd grid(3);
  grid << 0.0, 0.5, 1.0;
  Eigen::MatrixXd vals(2, 3);
  vals << 1, 2, 3, 4, 5, 6;
  std::string path = std::filesystem::temp_directory_path() / "fepls_fun_rt.csv";
  write_functional_csv(path, grid, vals);
  PredictorBlock b = read_functional_csv(path);
  EXPECT_FALSE(b.per_subject());
  EXPECT_EQ(b.n(), 2);
  EXPECT_EQ(b.grid, grid);
  EXPECT_EQ(b.values, vals);
  std::remove(path.c_str());
}

TEST(Csv, LongFormatPerSubjectGrids) {
  std::string path = std::filesystem::temp_directory_path() / "fepls_long.csv";
  {
    std::ofstream out(path);
    out << "subject,t,value\n";
    out << "1,0.0,1.5\n1,0.5,2.5\n";
    out << "2,0.1,0.5\n2,0.6,1.0\n2,0.9,2.0\n";
  }
  PredictorBlock b = read_functional_csv(path);
  EXPECT_TRUE(b.per_subject());
  ASSERT_EQ(b.n(), 2);
  EXPECT_EQ(b.subject_grids[0].size(), 2);
  EXPECT_EQ(b.subject_grids[1].size(), 3);
  EXPECT_NEAR(b.subject_values[1](2), 2.0, 1e-15);
  std::remove(path.c_str());
}

TEST(Csv, MalformedCellRaisesDataError) {
  std::string path = std::filesystem::temp_directory_path() / "fepls_bad.csv";
  {
    std::ofstream out(path);
    out << "1.0,2.0\n3.0,oops\n";
  }
  EXPECT_THROW(read_matrix_csv(path), DataError);
  std::remove(path.c_str());
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double v : {1.0 / 3.0, 0.1, 1e-300, 123456789.123456789}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(NormalQuantile, MatchesTabulatedValues) {
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-14);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-9);
  EXPECT_NEAR(normal_quantile(0.9), 1.2815515655446004, 1e-9);
  EXPECT_NEAR(normal_quantile(0.025), -1.959963984540054, 1e-9);
  EXPECT_NEAR(normal_quantile(0.999), 3.090232306167813, 1e-8);
}

TEST(NormalQuantile, RejectsOutOfRange) {
  EXPECT_THROW(normal_quantile(0.0), InvalidArgument);
  EXPECT_THROW(normal_quantile(1.0), InvalidArgument);
}
