#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "stsm/errors.hpp"
#include "stsm/simulate.hpp"
#include "stsm/temporal.hpp"

using namespace stsm;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Kolmogorov-Smirnov statistic of a sample against N(0, 1).
double ks_statistic(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

// Critical value of the KS statistic at level 0.01.
double ks_critical_01(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

Matrix empirical_covariance(const std::vector<Vector>& draws) {
  const Eigen::Index n = draws.front().size();
  Matrix c = Matrix::Zero(n, n);
  for (const auto& x : draws) c += x * x.transpose();
  return c / static_cast<double>(draws.size());
}

SimulationConfig full_config(std::uint64_t seed) {
  SimulationConfig c;
  c.spec.cycle = true;
  c.spec.spatial = SpatialMode::constant;
  c.truth.log_prec_gauss = 1.0;
  c.truth.log_prec_trend = 3.0;
  c.truth.log_prec_seasonal = 4.0;
  c.truth.log_prec_cycle = 2.0;
  c.truth.z_pacf1 = internal_from_pacf(0.5);
  c.truth.z_pacf2 = internal_from_pacf(-0.3);
  const MaternParams mp = params_from_sigma_rho(1.0, 2.0);
  c.truth.log_tau = mp.log_tau;
  c.truth.log_kappa = mp.log_kappa;
  c.stations = random_stations(20, 6.0, 6.0, seed);
  c.periods = 24;
  c.trend_level = 10.0;
  c.seasonal_amplitude = 1.5;
  c.missing_rate = 0.3;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(SampleGmrf, MomentsAndMarginalDistribution) {
  const CycleSpec cs{5, 0.6, -0.3, 2.0};
  const SparsePrecision q = ar2_precision(cs);
  const Matrix cov = Matrix(q).inverse();
  std::vector<Vector> draws;
  std::vector<double> std0;
  for (std::uint64_t s = 1; s <= 20000; ++s) {
    draws.push_back(sample_gmrf(q, s));
    std0.push_back(draws.back()[2] / std::sqrt(cov(2, 2)));
  }
  const Matrix emp = empirical_covariance(draws);
  for (Eigen::Index i = 0; i < 5; ++i) {
    EXPECT_NEAR(emp(i, i), cov(i, i), 0.03 * cov(i, i));
    for (Eigen::Index j = 0; j < i; ++j) EXPECT_NEAR(emp(i, j), cov(i, j), 0.03 * cov(i, i));
  }
  EXPECT_LT(ks_statistic(std0), ks_critical_01(std0.size()));
}

TEST(SampleGmrf, RejectsSingularPrecision) {
  EXPECT_THROW(sample_gmrf(rw1_structure(6), 1), InvalidArgument);
}

TEST(SampleIntrinsic, ConstrainedDrawsHavePseudoInverseCovariance) {
  const int n = 6;
  const Matrix q = 4.0 * Matrix(rw1_structure(n));
  const Matrix c = Matrix::Ones(1, n);
  // the constraint spans the null space, so the covariance is the pseudo-inverse
  const Matrix centered = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / n);
  const Matrix pinv = (q + Matrix::Constant(n, n, 1.0)).inverse() - Matrix::Constant(n, n, 1.0 / (n * n));
  std::vector<Vector> draws;
  for (std::uint64_t s = 1; s <= 20000; ++s) {
    draws.push_back(sample_intrinsic(q, c, s));
    ASSERT_NEAR(draws.back().sum(), 0.0, 1e-10);
  }
  const Matrix emp = empirical_covariance(draws);
  EXPECT_LT((pinv * centered - pinv).norm(), 1e-12);
  for (Eigen::Index i = 0; i < n; ++i) {
    EXPECT_NEAR(emp(i, i), pinv(i, i), 0.03 * pinv(i, i));
    for (Eigen::Index j = 0; j < i; ++j) EXPECT_NEAR(emp(i, j), pinv(i, j), 0.03 * pinv(i, i));
  }
}

TEST(SampleIntrinsic, ExtraConstraintIsSatisfied) {
  const Matrix q = Matrix(seasonal_structure(12, 4));
  Matrix c = Matrix::Zero(2, 12);
  c.row(0).setOnes();
  c(1, 0) = 1.0;
  const Vector x = sample_intrinsic(q, c, 7);
  EXPECT_LT((c * x).norm(), 1e-10);
}

TEST(Simulate, StationsInsideBox) {
  const auto st = random_stations(200, 3.0, 2.0, 5);
  ASSERT_EQ(st.size(), 200u);
  EXPECT_EQ(st.front().id, "S001");
  for (const auto& s : st) {
    EXPECT_GE(s.location.x, 0.0);
    EXPECT_LE(s.location.x, 3.0);
    EXPECT_GE(s.location.y, 0.0);
    EXPECT_LE(s.location.y, 2.0);
    EXPECT_GE(s.altitude, 0.0);
    EXPECT_LE(s.altitude, 1000.0);
  }
  EXPECT_THROW(random_stations(0, 1.0, 1.0, 1), InvalidArgument);
}

TEST(Simulate, DeterministicPerSeed) {
  const TriangulatedMesh mesh = stsm::testing::square_mesh(6, 6.0);
  const SimulationResult a = simulate_dataset(full_config(3), mesh);
  const SimulationResult b = simulate_dataset(full_config(3), mesh);
  const SimulationResult c = simulate_dataset(full_config(4), mesh);
  EXPECT_EQ(a.data.values.array().isNaN().count(), b.data.values.array().isNaN().count());
  EXPECT_EQ(a.truth.latent, b.truth.latent);
  EXPECT_EQ(a.truth.signal, b.truth.signal);
  EXPECT_NE(a.truth.signal, c.truth.signal);
  for (Eigen::Index i = 0; i < a.data.values.size(); ++i) {
    const double x = a.data.values.data()[i], y = b.data.values.data()[i];
    if (!std::isnan(x)) EXPECT_EQ(x, y);
  }
}

TEST(Simulate, MissingCountIsBinomial) {
  const TriangulatedMesh mesh = stsm::testing::square_mesh(6, 6.0);
  SimulationConfig c = full_config(11);
  c.stations = random_stations(50, 6.0, 6.0, 11);
  c.periods = 60;
  const SimulationResult r = simulate_dataset(c, mesh);
  const double cells = 3000.0;
  const double missing = static_cast<double>(r.data.values.array().isNaN().count());
  const double sd = std::sqrt(cells * 0.3 * 0.7);
  EXPECT_LT(std::abs(missing - 0.3 * cells), 4 * sd);
  EXPECT_EQ(r.data.n_observed(), static_cast<std::size_t>(cells - missing));
}

TEST(Simulate, NoiselessLimitReproducesSignal) {
  const TriangulatedMesh mesh = stsm::testing::square_mesh(6, 6.0);
  SimulationConfig c = full_config(2);
  c.missing_rate = 0.0;
  c.truth.log_prec_gauss = 40.0;
  const SimulationResult r = simulate_dataset(c, mesh);
  EXPECT_LT((r.data.values - r.truth.signal).cwiseAbs().maxCoeff(), 1e-7);
  // signal is the sum of the components and the projected field
  const Projector p = barycentric_projector(mesh, r.data.locations());
  const Vector field = p.weights * r.truth.spatial.col(0);
  for (Eigen::Index s = 0; s < r.truth.signal.rows(); ++s) {
    for (Eigen::Index t = 0; t < r.truth.signal.cols(); ++t) {
      EXPECT_NEAR(r.truth.signal(s, t), r.truth.trend[t] + r.truth.seasonal[t] + r.truth.cycle[t] + field[s],
                  1e-12);
    }
  }
  EXPECT_NEAR(r.truth.trend.mean(), 10.0, 1e-10);
}

TEST(Simulate, SeasonalPatternHasZeroWindowSums) {
  const TriangulatedMesh mesh = stsm::testing::square_mesh(6, 6.0);
  SimulationConfig c = full_config(9);
  c.truth.log_prec_seasonal = 40.0;
  const SimulationResult r = simulate_dataset(c, mesh);
  const Vector& s = r.truth.seasonal;
  for (Eigen::Index t = 0; t + 4 <= s.size(); ++t) EXPECT_NEAR(s.segment(t, 4).sum(), 0.0, 1e-8);
  EXPECT_GT(s.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_NEAR(s[0], s[4], 1e-8);
}

TEST(Simulate, LatentVectorFollowsLayout) {
  const TriangulatedMesh mesh = stsm::testing::square_mesh(6, 6.0);
  SimulationConfig c = full_config(5);
  c.missing_rate = 0.0;
  const SimulationResult r = simulate_dataset(c, mesh);
  const JointGMRF g = stsm::testing::model_for(r.data, c.spec, &mesh);
  ASSERT_EQ(g.design.cols(), r.truth.latent.size());
  const Vector eta = g.design * r.truth.latent;
  for (std::size_t k = 0; k < g.observations.size(); ++k) {
    const auto& o = g.observations[k];
    EXPECT_NEAR(eta[static_cast<Eigen::Index>(k)], r.truth.signal(o.station, o.period), 1e-10);
  }
}

TEST(Simulate, InvalidConfigurationsThrow) {
  const TriangulatedMesh mesh = stsm::testing::square_mesh(6, 6.0);
  SimulationConfig c = full_config(1);
  c.missing_rate = 1.0;
  EXPECT_THROW(simulate_dataset(c, mesh), InvalidArgument);
  c = full_config(1);
  c.beta = Vector::Ones(1);
  EXPECT_THROW(simulate_dataset(c, mesh), InvalidArgument);
  c = full_config(1);
  c.truth.log_prec_cycle.reset();
  EXPECT_ANY_THROW(simulate_dataset(c, mesh));
}

TEST(Simulate, KnownSurfaceIsRecovered) {
  MeshOptions mo;
  mo.max_edge_inner = 0.8;
  mo.max_edge_outer = 2.0;
  mo.extension_margin = 2.0;
  SimulationConfig c;
  c.spec.trend = false;
  c.spec.seasonal = false;
  c.spec.cycle = false;
  c.spec.spatial = SpatialMode::constant;
  c.stations = random_stations(40, 6.0, 6.0, 21);
  std::vector<Point2D> locs;
  for (const auto& s : c.stations) locs.push_back(s.location);
  const TriangulatedMesh mesh = build_mesh(locs, mo);
  c.truth.log_prec_gauss = 2.0;
  const MaternParams mp = params_from_sigma_rho(1.0, 3.0);
  c.truth.log_tau = mp.log_tau;
  c.truth.log_kappa = mp.log_kappa;
  c.intercept = 5.0;
  c.periods = 8;
  c.seed = 21;
  const SimulationResult r = simulate_dataset(c, mesh);
  const JointGMRF g = stsm::testing::model_for(r.data, c.spec, &mesh);
  const ThetaPosterior post(g, make_priors(c.spec, PriorOptions{}));
  InlaOptions o;
  o.latent_quantiles = false;
  const InlaResult fit = fit_inla(post, o);

  const Projector p = barycentric_projector(mesh, r.data.locations());
  const auto off = g.layout.spatial->offset;
  const auto nv = g.layout.spatial->size;
  Vector est = p.weights * fit.latent_mean.segment(off, nv);
  Vector truth = p.weights * r.truth.spatial.col(0);
  const Vector sd = p.weights * fit.latent_sd.segment(off, nv);
  // the overall level is shared with the intercept
  est.array() -= est.mean();
  truth.array() -= truth.mean();
  const double rmse = std::sqrt((est - truth).squaredNorm() / static_cast<double>(est.size()));
  EXPECT_LT(rmse, 2.0 * sd.mean());
}
