#include "stsm/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "stsm/errors.hpp"
#include "stsm/temporal.hpp"

namespace stsm {

namespace {

Vector standard_normal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = nd(rng);
  return z;
}

// Independent streams per component, derived from the master seed.
std::uint64_t substream(std::uint64_t seed, std::uint64_t component) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(component)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

Vector sample_gmrf(const SparsePrecision& precision, std::uint64_t seed) {
  SparseCholesky chol;
  if (!chol.factorize(precision)) {
    throw InvalidArgument("sample_gmrf: precision is not positive definite (rank deficient?)");
  }
  std::mt19937_64 rng(seed);
  return chol.sample_from_standard_normal(standard_normal(precision.rows(), rng));
}

Vector sample_intrinsic(const Matrix& precision, const Matrix& constraints, std::uint64_t seed) {
  const Eigen::Index n = precision.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> es(precision);
  const Vector& ev = es.eigenvalues();
  const double tol = 1e-10 * ev.cwiseAbs().maxCoeff();
  std::mt19937_64 rng(seed);
  const Vector z = standard_normal(n, rng);
  Vector x = Vector::Zero(n);
  Matrix pinv = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ev[i] > tol) {
      x += es.eigenvectors().col(i) * (z[i] / std::sqrt(ev[i]));
      pinv += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / ev[i];
    }
  }
  if (constraints.rows() > 0) {
    const Matrix w = pinv * constraints.transpose();
    const Matrix s = constraints * w;
    x -= w * s.ldlt().solve(constraints * x);
  }
  return x;
}

std::vector<Station> random_stations(int n, double width, double height, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("random_stations: need at least one station");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Station> out;
  for (int i = 0; i < n; ++i) {
    Station s;
    char id[16];
    std::snprintf(id, sizeof id, "S%03d", i + 1);
    s.id = id;
    s.location = {width * u(rng), height * u(rng)};
    s.altitude = 1000.0 * u(rng);
    s.dist_sea_km = 300.0 * u(rng);
    out.push_back(s);
  }
  return out;
}

SimulationResult simulate_dataset(const SimulationConfig& cfg, const TriangulatedMesh& mesh) {
  const ModelSpec& spec = cfg.spec;
  spec.validate();
  HyperLayout(spec).check(cfg.truth);
  if (!(cfg.missing_rate >= 0.0 && cfg.missing_rate < 1.0)) {
    throw InvalidArgument("simulate: missing_rate must lie in [0, 1)");
  }
  if (cfg.stations.empty()) throw InvalidArgument("simulate: no stations");
  if (static_cast<std::size_t>(cfg.beta.size()) != spec.covariates.size()) {
    throw InvalidArgument("simulate: beta has " + std::to_string(cfg.beta.size()) + " entries for " +
                          std::to_string(spec.covariates.size()) + " covariates");
  }
  const int T = cfg.periods;
  if (T < 2 || (spec.seasonal && T < spec.season_length)) throw InvalidArgument("simulate: too few periods");

  SimulationResult res;
  SimulationTruth& truth = res.truth;
  const auto nT = static_cast<Eigen::Index>(T);

  truth.trend = Vector::Constant(nT, spec.intercept() ? cfg.intercept : 0.0);
  if (spec.trend) {
    const Matrix q = std::exp(*cfg.truth.log_prec_trend) * Matrix(rw1_structure(T));
    truth.trend = sample_intrinsic(q, Matrix::Ones(1, nT), substream(cfg.seed, 1));
    truth.trend.array() += cfg.trend_level;
  }

  truth.seasonal = Vector::Zero(nT);
  if (spec.seasonal) {
    const int m = spec.season_length;
    const Matrix q = std::exp(*cfg.truth.log_prec_seasonal) * Matrix(seasonal_structure(T, m));
    truth.seasonal = sample_intrinsic(q, Matrix::Ones(1, nT), substream(cfg.seed, 2));
    if (cfg.seasonal_amplitude != 0.0) {
      // zero-sum periodic basis, then the member closest to a cosine whose
      // total over the series also vanishes
      Matrix basis = Matrix::Zero(nT, m - 1);
      for (int t = 0; t < T; ++t) {
        const int j = t % m;
        if (j < m - 1) basis(t, j) = 1.0;
        else basis.row(t).setConstant(-1.0);
      }
      Vector a(m - 1);
      for (int j = 0; j < m - 1; ++j) {
        a[j] = cfg.seasonal_amplitude * std::cos(2.0 * std::numbers::pi * j / m);
      }
      const Vector v = basis.transpose() * Vector::Ones(nT);
      if (v.squaredNorm() > 0) a -= v * (v.dot(a) / v.squaredNorm());
      truth.seasonal += basis * a;
    }
  }

  truth.cycle = Vector::Zero(nT);
  if (spec.cycle) {
    const CycleSpec cs{T, pacf_from_internal(*cfg.truth.z_pacf1), pacf_from_internal(*cfg.truth.z_pacf2),
                       std::exp(*cfg.truth.log_prec_cycle)};
    truth.cycle = sample_gmrf(ar2_precision(cs), substream(cfg.seed, 3));
  }

  const auto nv = static_cast<Eigen::Index>(mesh.n_vertices());
  std::vector<Point2D> locs;
  for (const auto& s : cfg.stations) locs.push_back(s.location);
  Projector proj;
  if (spec.spatial != SpatialMode::off) {
    const FemMatrices fem = assemble_fem(mesh);
    MaternParams mp;
    mp.log_tau = *cfg.truth.log_tau;
    mp.log_kappa = *cfg.truth.log_kappa;
    SparsePrecision qs;
    if (spec.nonstationary_tau_terms > 0) {
      qs = nonstationary_precision(fem, cfg.truth.theta_tau_extra, cfg.tau_basis, mp);
    } else {
      qs = matern_precision(fem, mp);
    }
    const int copies = spec.spatial == SpatialMode::replicates ? T : 1;
    truth.spatial.resize(nv, copies);
    for (int c = 0; c < copies; ++c) {
      truth.spatial.col(c) = sample_gmrf(qs, substream(cfg.seed, 10 + static_cast<std::uint64_t>(c)));
    }
    proj = barycentric_projector(mesh, locs);
  }
  truth.beta = cfg.beta;
  truth.hyper = cfg.truth;

  const auto ns = static_cast<Eigen::Index>(cfg.stations.size());
  Dataset& data = res.data;
  data.stations = cfg.stations;
  for (int t = 0; t < T; ++t) data.times.push_back(Period::from_index(cfg.start.index() + t));
  data.values.resize(ns, nT);
  truth.signal.resize(ns, nT);
  Dataset covs;
  covs.stations = cfg.stations;
  Vector fixed = Vector::Zero(ns);
  for (Eigen::Index s = 0; s < ns; ++s) {
    for (std::size_t k = 0; k < spec.covariates.size(); ++k) {
      fixed[s] += covs.covariate(static_cast<std::size_t>(s), spec.covariates[k]) *
                  cfg.beta[static_cast<Eigen::Index>(k)];
    }
  }
  Matrix field = Matrix::Zero(ns, truth.spatial.cols());
  if (spec.spatial != SpatialMode::off) field = proj.weights * truth.spatial;

  std::mt19937_64 noise_rng(substream(cfg.seed, 4));
  std::mt19937_64 mask_rng(substream(cfg.seed, 5));
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double noise_sd = std::exp(-0.5 * cfg.truth.log_prec_gauss);
  for (Eigen::Index t = 0; t < nT; ++t) {
    for (Eigen::Index s = 0; s < ns; ++s) {
      double v = truth.trend[t] + truth.seasonal[t] + truth.cycle[t] + fixed[s];
      if (field.cols() > 0) v += field(s, spec.spatial == SpatialMode::replicates ? t : 0);
      truth.signal(s, t) = v;
      const double y = v + noise_sd * nd(noise_rng);
      data.values(s, t) = u(mask_rng) < cfg.missing_rate ? std::numeric_limits<double>::quiet_NaN() : y;
    }
  }

  const LatentLayout layout = make_latent_layout(spec, T, static_cast<int>(nv));
  truth.latent = Vector::Zero(layout.size);
  if (layout.trend) truth.latent.segment(layout.trend->offset, nT) = truth.trend;
  if (layout.seasonal) truth.latent.segment(layout.seasonal->offset, nT) = truth.seasonal;
  if (layout.cycle) truth.latent.segment(layout.cycle->offset, nT) = truth.cycle;
  if (layout.spatial) {
    truth.latent.segment(layout.spatial->offset, layout.spatial->size) =
        Eigen::Map<const Vector>(truth.spatial.data(), truth.spatial.size());
  }
  if (layout.intercept) truth.latent[layout.intercept->offset] = cfg.intercept;
  if (layout.betas) truth.latent.segment(layout.betas->offset, layout.betas->size) = cfg.beta;
  return res;
}

}  // namespace stsm
