#include "stsm/model.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "stsm/errors.hpp"
#include "stsm/temporal.hpp"

namespace stsm {

const char* to_string(SpatialMode mode) {
  switch (mode) {
    case SpatialMode::off:
      return "off";
    case SpatialMode::constant:
      return "constant";
    case SpatialMode::replicates:
      return "replicates";
  }
  return "?";
}

SpatialMode spatial_mode_from_string(const std::string& s) {
  if (s == "off") return SpatialMode::off;
  if (s == "constant") return SpatialMode::constant;
  if (s == "replicates" || s == "iid") return SpatialMode::replicates;
  throw ConfigError("unknown spatial mode '" + s + "' (expected off, constant or replicates)");
}

void ModelSpec::validate() const {
  if (seasonal && season_length < 2) throw InvalidArgument("model: season length must be >= 2");
  for (const auto& c : covariates) {
    if (!is_known_covariate(c)) throw ConfigError("model: unknown covariate '" + c + "'");
  }
  if (nonstationary_tau_terms < 0) throw InvalidArgument("model: negative basis column count");
  if (nonstationary_tau_terms > 0 && spatial == SpatialMode::off) {
    throw InvalidArgument("model: non-stationary tau requires a spatial block");
  }
}

// ---------------------------------------------------------------------------
// Hyperparameter layout

HyperLayout::HyperLayout(const ModelSpec& spec) {
  kinds_.push_back(HyperKind::log_prec_gauss);
  if (spec.trend) kinds_.push_back(HyperKind::log_prec_trend);
  if (spec.seasonal) kinds_.push_back(HyperKind::log_prec_seasonal);
  if (spec.cycle) {
    kinds_.push_back(HyperKind::log_prec_cycle);
    kinds_.push_back(HyperKind::z_pacf1);
    kinds_.push_back(HyperKind::z_pacf2);
  }
  if (spec.spatial != SpatialMode::off) {
    kinds_.push_back(HyperKind::log_tau);
    kinds_.push_back(HyperKind::log_kappa);
    for (int k = 0; k < spec.nonstationary_tau_terms; ++k) {
      kinds_.push_back(HyperKind::theta_tau_extra);
    }
  }
  extra_index_.assign(kinds_.size(), -1);
  int e = 0;
  for (std::size_t i = 0; i < kinds_.size(); ++i) {
    if (kinds_[i] == HyperKind::theta_tau_extra) extra_index_[i] = e++;
  }
}

std::string HyperLayout::name(std::size_t i) const {
  switch (kinds_[i]) {
    case HyperKind::log_prec_gauss:
      return "Precision Gaussian";
    case HyperKind::log_prec_trend:
      return "Precision RW";
    case HyperKind::log_prec_seasonal:
      return "Precision Seasonal";
    case HyperKind::log_prec_cycle:
      return "Precision Cycle";
    case HyperKind::z_pacf1:
      return "PACF1";
    case HyperKind::z_pacf2:
      return "PACF2";
    case HyperKind::log_tau:
      return "log tau";
    case HyperKind::log_kappa:
      return "log kappa";
    case HyperKind::theta_tau_extra:
      return "theta tau " + std::to_string(extra_index_[i] + 2);
  }
  return "?";
}

std::string HyperLayout::internal_name(std::size_t i) const {
  switch (kinds_[i]) {
    case HyperKind::log_prec_gauss:
      return "log_prec_gauss";
    case HyperKind::log_prec_trend:
      return "log_prec_trend";
    case HyperKind::log_prec_seasonal:
      return "log_prec_seasonal";
    case HyperKind::log_prec_cycle:
      return "log_prec_cycle";
    case HyperKind::z_pacf1:
      return "z_pacf1";
    case HyperKind::z_pacf2:
      return "z_pacf2";
    case HyperKind::log_tau:
      return "log_tau";
    case HyperKind::log_kappa:
      return "log_kappa";
    case HyperKind::theta_tau_extra:
      return "theta_tau_" + std::to_string(extra_index_[i] + 2);
  }
  return "?";
}

void HyperLayout::check(const HyperParams& h) const {
  auto has = [&](HyperKind k) {
    for (auto x : kinds_) {
      if (x == k) return true;
    }
    return false;
  };
  auto require = [&](const std::optional<double>& v, HyperKind k, const char* label) {
    if (v.has_value() != has(k)) {
      throw InvalidArgument(std::string("hyperparameter ") + label +
                            (v ? " given for an inactive component" : " missing"));
    }
    if (v && !std::isfinite(*v)) {
      throw InvalidArgument(std::string("hyperparameter ") + label + " is not finite");
    }
  };
  if (!std::isfinite(h.log_prec_gauss)) throw InvalidArgument("log_prec_gauss is not finite");
  require(h.log_prec_trend, HyperKind::log_prec_trend, "log_prec_trend");
  require(h.log_prec_seasonal, HyperKind::log_prec_seasonal, "log_prec_seasonal");
  require(h.log_prec_cycle, HyperKind::log_prec_cycle, "log_prec_cycle");
  require(h.z_pacf1, HyperKind::z_pacf1, "z_pacf1");
  require(h.z_pacf2, HyperKind::z_pacf2, "z_pacf2");
  require(h.log_tau, HyperKind::log_tau, "log_tau");
  require(h.log_kappa, HyperKind::log_kappa, "log_kappa");
  int extras = 0;
  for (auto k : kinds_) extras += k == HyperKind::theta_tau_extra ? 1 : 0;
  if (h.theta_tau_extra.size() != extras) {
    throw InvalidArgument("hyperparameter theta_tau_extra has " +
                          std::to_string(h.theta_tau_extra.size()) + " entries, expected " +
                          std::to_string(extras));
  }
}

Vector HyperLayout::pack(const HyperParams& h) const {
  check(h);
  Vector v(static_cast<Eigen::Index>(kinds_.size()));
  for (std::size_t i = 0; i < kinds_.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    switch (kinds_[i]) {
      case HyperKind::log_prec_gauss:
        v[idx] = h.log_prec_gauss;
        break;
      case HyperKind::log_prec_trend:
        v[idx] = *h.log_prec_trend;
        break;
      case HyperKind::log_prec_seasonal:
        v[idx] = *h.log_prec_seasonal;
        break;
      case HyperKind::log_prec_cycle:
        v[idx] = *h.log_prec_cycle;
        break;
      case HyperKind::z_pacf1:
        v[idx] = *h.z_pacf1;
        break;
      case HyperKind::z_pacf2:
        v[idx] = *h.z_pacf2;
        break;
      case HyperKind::log_tau:
        v[idx] = *h.log_tau;
        break;
      case HyperKind::log_kappa:
        v[idx] = *h.log_kappa;
        break;
      case HyperKind::theta_tau_extra:
        v[idx] = h.theta_tau_extra[extra_index_[i]];
        break;
    }
  }
  return v;
}

HyperParams HyperLayout::unpack(const Vector& v) const {
  if (v.size() != static_cast<Eigen::Index>(kinds_.size())) {
    throw InvalidArgument("HyperLayout::unpack: size mismatch");
  }
  HyperParams h;
  int extras = 0;
  for (auto k : kinds_) extras += k == HyperKind::theta_tau_extra ? 1 : 0;
  h.theta_tau_extra = Vector::Zero(extras);
  for (std::size_t i = 0; i < kinds_.size(); ++i) {
    const double x = v[static_cast<Eigen::Index>(i)];
    switch (kinds_[i]) {
      case HyperKind::log_prec_gauss:
        h.log_prec_gauss = x;
        break;
      case HyperKind::log_prec_trend:
        h.log_prec_trend = x;
        break;
      case HyperKind::log_prec_seasonal:
        h.log_prec_seasonal = x;
        break;
      case HyperKind::log_prec_cycle:
        h.log_prec_cycle = x;
        break;
      case HyperKind::z_pacf1:
        h.z_pacf1 = x;
        break;
      case HyperKind::z_pacf2:
        h.z_pacf2 = x;
        break;
      case HyperKind::log_tau:
        h.log_tau = x;
        break;
      case HyperKind::log_kappa:
        h.log_kappa = x;
        break;
      case HyperKind::theta_tau_extra:
        h.theta_tau_extra[extra_index_[i]] = x;
        break;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Layout and design

std::vector<BlockRange> LatentLayout::blocks() const {
  std::vector<BlockRange> out;
  for (const auto* b : {&trend, &seasonal, &cycle, &spatial, &intercept, &betas}) {
    if (*b) out.push_back(**b);
  }
  return out;
}

LatentLayout make_latent_layout(const ModelSpec& spec, int periods, int n_vertices) {
  LatentLayout layout;
  Eigen::Index offset = 0;
  auto add = [&](std::optional<BlockRange>& slot, const char* name, Eigen::Index size) {
    slot = BlockRange{name, offset, size};
    offset += size;
  };
  if (spec.trend) add(layout.trend, "trend", periods);
  if (spec.seasonal) add(layout.seasonal, "seasonal", periods);
  if (spec.cycle) add(layout.cycle, "cycle", periods);
  if (spec.spatial == SpatialMode::constant) add(layout.spatial, "spatial", n_vertices);
  if (spec.spatial == SpatialMode::replicates) {
    add(layout.spatial, "spatial", static_cast<Eigen::Index>(n_vertices) * periods);
  }
  if (spec.intercept()) add(layout.intercept, "intercept", 1);
  if (!spec.covariates.empty()) {
    add(layout.betas, "beta", static_cast<Eigen::Index>(spec.covariates.size()));
  }
  layout.size = offset;
  if (layout.size == 0) throw InvalidArgument("model: no active latent component");
  return layout;
}

JointGMRF build_design(const Dataset& dataset, const ModelSpec& spec, const Projector& projector) {
  spec.validate();
  dataset.validate();
  const auto n_s = static_cast<int>(dataset.n_stations());
  const auto n_t = static_cast<int>(dataset.n_periods());
  if (spec.seasonal && n_t < spec.season_length) {
    throw InvalidArgument("model: fewer periods than the season length");
  }
  if (n_t < 2 && (spec.trend || spec.seasonal)) throw InvalidArgument("model: need >= 2 periods");
  const bool spatial = spec.spatial != SpatialMode::off;
  if (spatial && projector.rows() != n_s) {
    throw InvalidArgument("build_design: projector rows do not match station count");
  }

  JointGMRF g;
  g.spec = spec;
  g.periods = n_t;
  g.n_vertices = spatial ? static_cast<int>(projector.cols()) : 0;
  g.layout = make_latent_layout(spec, n_t, g.n_vertices);

  const auto p = static_cast<Eigen::Index>(spec.covariates.size());
  g.station_covariates.resize(n_s, p);
  for (int s = 0; s < n_s; ++s) {
    for (Eigen::Index k = 0; k < p; ++k) {
      const double v = dataset.covariate(static_cast<std::size_t>(s), spec.covariates[k]);
      if (!std::isfinite(v)) {
        throw DataError("station '" + dataset.stations[s].id + "' has no value for covariate '" +
                        spec.covariates[k] + "'");
      }
      g.station_covariates(s, k) = v;
    }
  }

  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> ys;
  for (int t = 0; t < n_t; ++t) {
    for (int s = 0; s < n_s; ++s) {
      const double v = dataset.values(s, t);
      if (std::isnan(v)) continue;
      const auto row = static_cast<int>(ys.size());
      ys.push_back(v);
      g.observations.push_back({s, t});
      if (g.layout.trend) trips.emplace_back(row, g.layout.trend->offset + t, 1.0);
      if (g.layout.seasonal) trips.emplace_back(row, g.layout.seasonal->offset + t, 1.0);
      if (g.layout.cycle) trips.emplace_back(row, g.layout.cycle->offset + t, 1.0);
      if (g.layout.spatial) {
        Eigen::Index base = g.layout.spatial->offset;
        if (spec.spatial == SpatialMode::replicates) base += static_cast<Eigen::Index>(t) * g.n_vertices;
        for (decltype(projector.weights)::InnerIterator it(projector.weights, s); it; ++it) {
          trips.emplace_back(row, static_cast<int>(base + it.col()), it.value());
        }
      }
      if (g.layout.intercept) trips.emplace_back(row, g.layout.intercept->offset, 1.0);
      for (Eigen::Index k = 0; k < p; ++k) {
        trips.emplace_back(row, static_cast<int>(g.layout.betas->offset + k), g.station_covariates(s, k));
      }
    }
  }
  g.y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  g.design.resize(static_cast<Eigen::Index>(ys.size()), g.layout.size);
  g.design.setFromTriplets(trips.begin(), trips.end());
  g.design_gram = SparseMatrix(g.design.transpose() * g.design);

  if (g.layout.seasonal) {
    g.constraints = Matrix::Zero(1, g.layout.size);
    g.constraints.block(0, g.layout.seasonal->offset, 1, n_t).setOnes();
  } else {
    g.constraints.resize(0, g.layout.size);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Prior

namespace {

SparseMatrix scaled_identity(Eigen::Index n, double value) {
  SparseMatrix m(n, n);
  m.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Eigen::Index i = 0; i < n; ++i) m.insert(i, i) = value;
  m.makeCompressed();
  return m;
}

MaternParams spatial_params(const HyperParams& h) {
  MaternParams mp;
  mp.log_tau = *h.log_tau;
  mp.log_kappa = *h.log_kappa;
  return mp;
}

SparsePrecision spatial_block(const ModelSpec& spec, const HyperParams& hyper,
                              const FemMatrices& fem, const Matrix* tau_basis) {
  if (spec.nonstationary_tau_terms > 0) {
    if (!tau_basis) throw InvalidArgument("prior: non-stationary model without a tau basis");
    return nonstationary_precision(fem, hyper.theta_tau_extra, *tau_basis, spatial_params(hyper));
  }
  return matern_precision(fem, spatial_params(hyper));
}

std::vector<SparseMatrix> prior_blocks(const ModelSpec& spec, const HyperParams& hyper,
                                       int periods, const SparsePrecision* spatial_q) {
  std::vector<SparseMatrix> blocks;
  if (spec.trend) blocks.push_back(rw1_precision({periods, std::exp(*hyper.log_prec_trend)}));
  if (spec.seasonal) {
    blocks.push_back(
        seasonal_precision({periods, spec.season_length, std::exp(*hyper.log_prec_seasonal)}));
  }
  if (spec.cycle) {
    blocks.push_back(ar2_precision({periods, pacf_from_internal(*hyper.z_pacf1),
                                    pacf_from_internal(*hyper.z_pacf2),
                                    std::exp(*hyper.log_prec_cycle)}));
  }
  if (spec.spatial == SpatialMode::constant) blocks.push_back(*spatial_q);
  if (spec.spatial == SpatialMode::replicates) {
    for (int t = 0; t < periods; ++t) blocks.push_back(*spatial_q);
  }
  if (spec.intercept()) blocks.push_back(scaled_identity(1, kFixedEffectPrecision));
  if (!spec.covariates.empty()) {
    blocks.push_back(scaled_identity(static_cast<Eigen::Index>(spec.covariates.size()),
                                     kFixedEffectPrecision));
  }
  return blocks;
}

std::pair<double, int> log_pseudo_determinant(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const Vector& ev = es.eigenvalues();
  const double tol = 1e-9 * ev.cwiseAbs().maxCoeff();
  double s = 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > tol) {
      s += std::log(ev[i]);
      ++rank;
    }
  }
  return {s, rank};
}

}  // namespace

SparsePrecision prior_precision(const ModelSpec& spec, const HyperParams& hyper,
                                const FemMatrices* fem, int periods, const Matrix* tau_basis) {
  spec.validate();
  HyperLayout(spec).check(hyper);
  SparsePrecision spatial_q;
  if (spec.spatial != SpatialMode::off) {
    if (!fem) throw InvalidArgument("prior_precision: spatial model without FEM matrices");
    spatial_q = spatial_block(spec, hyper, *fem, tau_basis);
  }
  return block_diagonal(prior_blocks(spec, hyper, periods, &spatial_q));
}

PriorConstants prior_constants(const JointGMRF& gmrf) {
  PriorConstants c;
  const int n = gmrf.periods;
  if (gmrf.spec.trend) {
    std::tie(c.rw1_log_pdet, c.rw1_rank) = log_pseudo_determinant(Matrix(rw1_structure(n)));
  }
  if (gmrf.spec.seasonal) {
    // restrict to the sum-to-zero subspace: nonzero spectrum of P R P
    const Matrix r(seasonal_structure(n, gmrf.spec.season_length));
    const Matrix proj = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / n);
    std::tie(c.seasonal_log_pdet, c.seasonal_rank) = log_pseudo_determinant(proj * r * proj);
  }
  // fill-reducing orderings depend only on sparsity patterns, which do not
  // change with the hyperparameters
  const HyperLayout hl(gmrf.spec);
  const HyperParams h = hl.unpack(Vector::Zero(static_cast<Eigen::Index>(hl.size())));
  SparsePrecision spatial_q;
  if (gmrf.spec.spatial != SpatialMode::off) {
    if (!gmrf.fem) throw InvalidArgument("prior_constants: spatial model without FEM matrices");
    spatial_q = spatial_block(gmrf.spec, h, *gmrf.fem, &gmrf.tau_basis);
    c.spatial_ordering = SparseCholesky::ordering_for(spatial_q);
  }
  const SparseMatrix joint = block_diagonal(prior_blocks(gmrf.spec, h, n, &spatial_q));
  if (joint.rows() == gmrf.design_gram.rows()) {
    c.posterior_ordering = SparseCholesky::ordering_for(SparseMatrix(joint + gmrf.design_gram));
  }
  return c;
}

PriorEvaluation evaluate_prior(const JointGMRF& gmrf, const PriorConstants& constants,
                               const HyperParams& hyper) {
  const ModelSpec& spec = gmrf.spec;
  PriorEvaluation out;
  SparsePrecision spatial_q;
  if (spec.spatial != SpatialMode::off) {
    spatial_q = spatial_block(spec, hyper, *gmrf.fem, &gmrf.tau_basis);
    SparseCholesky chol;
    if (!chol.factorize(spatial_q, constants.spatial_ordering)) {
      throw NumericalError("spatial prior precision is not positive definite");
    }
    const int copies = spec.spatial == SpatialMode::replicates ? gmrf.periods : 1;
    out.log_pdet += copies * chol.log_determinant();
    out.rank += static_cast<Eigen::Index>(copies) * spatial_q.rows();
  }
  out.precision = block_diagonal(prior_blocks(spec, hyper, gmrf.periods, &spatial_q));
  if (spec.trend) {
    out.log_pdet += constants.rw1_rank * *hyper.log_prec_trend + constants.rw1_log_pdet;
    out.rank += constants.rw1_rank;
  }
  if (spec.seasonal) {
    out.log_pdet += constants.seasonal_rank * *hyper.log_prec_seasonal + constants.seasonal_log_pdet;
    out.rank += constants.seasonal_rank;
  }
  if (spec.cycle) {
    const CycleSpec cs{gmrf.periods, pacf_from_internal(*hyper.z_pacf1),
                       pacf_from_internal(*hyper.z_pacf2), std::exp(*hyper.log_prec_cycle)};
    out.log_pdet += ar2_log_determinant(cs);
    out.rank += gmrf.periods;
  }
  const Eigen::Index fixed = (spec.intercept() ? 1 : 0) + static_cast<Eigen::Index>(spec.covariates.size());
  out.log_pdet += static_cast<double>(fixed) * std::log(kFixedEffectPrecision);
  out.rank += fixed;
  return out;
}

// ---------------------------------------------------------------------------
// Posterior

Vector GaussianPosterior::marginal_variances() const {
  Vector var = cholesky.inverse_diagonal();
  if (constraint_solve.cols() > 0) {
    const Matrix s_inv_wt = constraint_gram.ldlt().solve(constraint_solve.transpose());
    var -= (constraint_solve.cwiseProduct(s_inv_wt.transpose())).rowwise().sum();
  }
  return var.cwiseMax(0.0);
}

GaussianPosterior gaussian_posterior(const JointGMRF& gmrf, const SparsePrecision& prior,
                                     const Vector& y, double log_prec_gauss,
                                     std::shared_ptr<const SparseCholesky::Ordering> ordering) {
  if (y.size() != gmrf.design.rows()) {
    throw InvalidArgument("gaussian_posterior: y has " + std::to_string(y.size()) +
                          " entries, design has " + std::to_string(gmrf.design.rows()) + " rows");
  }
  if (prior.rows() != gmrf.layout.size) throw InvalidArgument("gaussian_posterior: prior size mismatch");
  const double tau = std::exp(log_prec_gauss);
  GaussianPosterior post;
  post.precision = prior + tau * gmrf.design_gram;
  if (!post.cholesky.factorize(post.precision, std::move(ordering))) {
    throw NumericalError("posterior precision is not positive definite (smallest pivot " +
                         std::to_string(post.cholesky.smallest_pivot()) + ")");
  }
  post.log_det_precision = post.cholesky.log_determinant();
  const Vector b = tau * (gmrf.design.transpose() * y);
  post.mean = post.cholesky.solve(b);
  if (gmrf.constraints.rows() > 0) {
    const Matrix& c = gmrf.constraints;
    post.constraint_solve = post.cholesky.solve(Matrix(c.transpose()));
    post.constraint_gram = c * post.constraint_solve;
    const Vector violation = c * post.mean;
    post.mean -= post.constraint_solve * post.constraint_gram.ldlt().solve(violation);
  }
  return post;
}

double log_evidence(const JointGMRF& gmrf, const PriorEvaluation& prior, const HyperParams& hyper,
                    const GaussianPosterior& post) {
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const double tau = std::exp(hyper.log_prec_gauss);
  const auto n = static_cast<double>(gmrf.n_obs());
  const Vector resid = gmrf.y - gmrf.design * post.mean;
  const double quad = post.mean.dot(prior.precision * post.mean);
  const auto k = gmrf.constraints.rows();
  double log_det_post = post.log_det_precision;
  if (k > 0) {
    const Matrix cct = gmrf.constraints * gmrf.constraints.transpose();
    log_det_post += std::log(post.constraint_gram.determinant()) - std::log(cct.determinant());
  }
  const auto free_dim = static_cast<double>(gmrf.layout.size - k);
  return -0.5 * n * log2pi + 0.5 * n * hyper.log_prec_gauss - 0.5 * tau * resid.squaredNorm() -
         0.5 * static_cast<double>(prior.rank) * log2pi + 0.5 * prior.log_pdet - 0.5 * quad +
         0.5 * free_dim * log2pi - 0.5 * log_det_post;
}

// ---------------------------------------------------------------------------

Matrix coordinate_basis(const TriangulatedMesh& mesh, const std::vector<std::string>& columns,
                        const Dataset* dataset) {
  const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
  Matrix basis(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    Vector col(n);
    const std::string& name = columns[c];
    for (Eigen::Index v = 0; v < n; ++v) {
      const Point2D& p = mesh.vertices[static_cast<std::size_t>(v)];
      if (name == "x" || name == "longitude") {
        col[v] = p.x;
      } else if (name == "y" || name == "latitude") {
        col[v] = p.y;
      } else if (name == "altitude") {
        if (!dataset || dataset->stations.empty()) {
          throw ConfigError("tau basis 'altitude' needs station data");
        }
        // inverse squared distance interpolation of station altitudes
        double wsum = 0.0, acc = 0.0;
        bool exact = false;
        for (const auto& s : dataset->stations) {
          const double d2 = (s.location.x - p.x) * (s.location.x - p.x) +
                            (s.location.y - p.y) * (s.location.y - p.y);
          if (d2 == 0.0) {
            col[v] = s.altitude;
            exact = true;
            break;
          }
          wsum += 1.0 / d2;
          acc += s.altitude / d2;
        }
        if (!exact) col[v] = acc / wsum;
      } else {
        throw ConfigError("unknown tau basis column '" + name + "'");
      }
    }
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().mean());
    basis.col(static_cast<Eigen::Index>(c)) = sd > 0 ? Vector((col.array() - mean) / sd) : Vector(col.array() - mean);
  }
  return basis;
}

}  // namespace stsm
