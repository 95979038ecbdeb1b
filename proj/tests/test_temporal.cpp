#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "stsm/errors.hpp"
#include "stsm/temporal.hpp"

using namespace stsm;

namespace {

// Stationary autocovariances from the Yule-Walker equations at unit innovation variance.
std::vector<double> yule_walker(double phi1, double phi2, int lags) {
  std::vector<double> g(static_cast<std::size_t>(lags) + 1);
  g[0] = (1 - phi2) / ((1 + phi2) * ((1 - phi2) * (1 - phi2) - phi1 * phi1));
  if (lags >= 1) g[1] = phi1 * g[0] / (1 - phi2);
  for (int k = 2; k <= lags; ++k) g[k] = phi1 * g[k - 1] + phi2 * g[k - 2];
  return g;
}

Matrix toeplitz_covariance(double phi1, double phi2, int n) {
  const auto g = yule_walker(phi1, phi2, n);
  Matrix s(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) s(i, j) = g[static_cast<std::size_t>(std::abs(i - j))];
  }
  return s;
}

}  // namespace

TEST(RandomWalk, ThreePointStructure) {
  Matrix expect(3, 3);
  expect << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  EXPECT_EQ(Matrix(rw1_structure(3)), expect);
  TrendSpec s;
  s.periods = 3;
  s.precision = 2.5;
  EXPECT_LT((Matrix(rw1_precision(s)) - 2.5 * expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RandomWalk, QuadraticFormIsSumOfSquaredIncrements) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  const int t = 17;
  Vector x(t);
  for (int i = 0; i < t; ++i) x[i] = n01(rng);
  double sum = 0;
  for (int i = 1; i < t; ++i) sum += (x[i] - x[i - 1]) * (x[i] - x[i - 1]);
  EXPECT_NEAR(x.dot(rw1_structure(t) * x), sum, 1e-12);
  EXPECT_LT((rw1_structure(t) * Vector::Ones(t)).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::SelfAdjointEigenSolver<Matrix> es{Matrix(rw1_structure(t))};
  int zero = 0;
  for (int i = 0; i < t; ++i) zero += std::abs(es.eigenvalues()[i]) < 1e-10 ? 1 : 0;
  EXPECT_EQ(zero, 1);
}

TEST(Seasonal, QuadraticFormIsSumOfWindowSquares) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (int m : {2, 4}) {
    const int t = 11;
    Vector x(t);
    for (int i = 0; i < t; ++i) x[i] = n01(rng);
    double sum = 0;
    for (int i = m - 1; i < t; ++i) {
      double w = 0;
      for (int k = 0; k < m; ++k) w += x[i - k];
      sum += w * w;
    }
    EXPECT_NEAR(x.dot(seasonal_structure(t, m) * x), sum, 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es{Matrix(seasonal_structure(t, m))};
    int zero = 0;
    for (int i = 0; i < t; ++i) zero += std::abs(es.eigenvalues()[i]) < 1e-10 ? 1 : 0;
    EXPECT_EQ(zero, m - 1);
  }
}

TEST(Seasonal, PeriodTwoMatchesHandExpansion) {
  // windows (s0+s1), (s1+s2) on three points
  Matrix expect(3, 3);
  expect << 1, 1, 0, 1, 2, 1, 0, 1, 1;
  EXPECT_EQ(Matrix(seasonal_structure(3, 2)), expect);
}

TEST(Ar2, PacfMapsToCoefficients) {
  const Ar2Coefficients ar = ar2_from_pacf(0.2891, -0.046);
  EXPECT_NEAR(ar.phi1, 0.3023, 5e-4);
  EXPECT_NEAR(ar.phi2, -0.046, 5e-4);
  const auto back = pacf_from_ar2(ar);
  EXPECT_NEAR(back.first, 0.2891, 1e-14);
  EXPECT_NEAR(back.second, -0.046, 1e-14);
}

TEST(Ar2, CyclePeriods) {
  EXPECT_NEAR(*cycle_period(ar2_from_pacf(0.2891, -0.046)), 7.97, 0.02);
  EXPECT_NEAR(*cycle_period(ar2_from_pacf(0.3279, -0.0716)), 7.35, 0.02);
  EXPECT_FALSE(cycle_period(ar2_from_pacf(0.6738, 0.1004)).has_value());
  // roots at angle pi/2 give a period of four
  EXPECT_NEAR(*cycle_period({0.0, -0.5}), 4.0, 1e-12);
  EXPECT_THROW(cycle_period({1.5, 0.2}), InvalidArgument);
}

TEST(Ar2, OpenSquareMapsIntoStationarityTriangle) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double p1 = u(rng), p2 = u(rng);
    const Ar2Coefficients ar = ar2_from_pacf(p1, p2);
    ASSERT_TRUE(is_stationary(ar)) << p1 << " " << p2;
    EXPECT_LT(std::abs(ar.phi2), 1.0);
    EXPECT_LT(ar.phi1 + ar.phi2, 1.0);
    EXPECT_LT(ar.phi2 - ar.phi1, 1.0);
  }
}

TEST(Ar2, InternalTransformRoundTrip) {
  for (double z : {-6.0, -1.0, 0.0, 0.3, 4.0}) {
    const double p = pacf_from_internal(z);
    EXPECT_NEAR(p, std::tanh(z / 2), 1e-15);
    EXPECT_NEAR(internal_from_pacf(p), z, 1e-10);
  }
  EXPECT_THROW(internal_from_pacf(1.0), InvalidArgument);
}

TEST(Ar2, PrecisionInvertsYuleWalkerCovariance) {
  for (auto [p1, p2] : {std::pair{0.5, -0.3}, std::pair{0.2891, -0.046}, std::pair{-0.7, 0.6}}) {
    CycleSpec s;
    s.periods = 12;
    s.pacf1 = p1;
    s.pacf2 = p2;
    s.precision = 1.7;
    const Ar2Coefficients ar = ar2_from_pacf(p1, p2);
    const Matrix cov = toeplitz_covariance(ar.phi1, ar.phi2, s.periods) / s.precision;
    const Matrix q(ar2_precision(s));
    EXPECT_LT((q * cov - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-10);
    const double logdet = -std::log(cov.determinant());
    EXPECT_NEAR(ar2_log_determinant(s), logdet, 1e-9);
    const Vector g = ar2_autocovariance(ar, 5);
    const auto yw = yule_walker(ar.phi1, ar.phi2, 5);
    for (int k = 0; k <= 5; ++k) EXPECT_NEAR(g[k], yw[static_cast<std::size_t>(k)], 1e-12);
  }
}

TEST(Ar2, PrecisionIsBanded) {
  CycleSpec s;
  s.periods = 10;
  s.pacf1 = 0.4;
  s.pacf2 = 0.2;
  const Matrix q(ar2_precision(s));
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      if (std::abs(i - j) > 2) EXPECT_EQ(q(i, j), 0.0);
    }
  }
}

TEST(Ar2, RejectsNonStationary) {
  CycleSpec s;
  s.periods = 5;
  s.pacf1 = 1.2;
  EXPECT_THROW(ar2_precision(s), InvalidArgument);
}
