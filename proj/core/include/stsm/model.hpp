#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stsm/dataset.hpp"
#include "stsm/mesh.hpp"
#include "stsm/sparse.hpp"
#include "stsm/spde.hpp"

namespace stsm {

enum class SpatialMode { off, constant, replicates };

const char* to_string(SpatialMode mode);
SpatialMode spatial_mode_from_string(const std::string& s);

/// Which latent blocks are active.
struct ModelSpec {
  bool trend = true;
  bool seasonal = true;
  int season_length = 4;
  bool cycle = true;
  SpatialMode spatial = SpatialMode::constant;
  std::vector<std::string> covariates;
  /// Number of extra log-tau basis columns; zero means stationary.
  int nonstationary_tau_terms = 0;

  /// The constant-mean variant replaces the trend by an explicit intercept.
  bool intercept() const { return !trend; }
  void validate() const;
};

/// Prior precision of every fixed effect (intercept and covariate slopes).
inline constexpr double kFixedEffectPrecision = 0.001;
/// Log-precisions are confined to this interval during optimisation.
inline constexpr double kLogPrecisionBound = 20.0;

/// Hyperparameters on the internal (optimisation) scale. Only entries for
/// active components may be set.
struct HyperParams {
  double log_prec_gauss = 0.0;
  std::optional<double> log_prec_trend;
  std::optional<double> log_prec_seasonal;
  std::optional<double> log_prec_cycle;
  std::optional<double> z_pacf1;
  std::optional<double> z_pacf2;
  std::optional<double> log_tau;
  std::optional<double> log_kappa;
  Vector theta_tau_extra;
};

enum class HyperKind {
  log_prec_gauss,
  log_prec_trend,
  log_prec_seasonal,
  log_prec_cycle,
  z_pacf1,
  z_pacf2,
  log_tau,
  log_kappa,
  theta_tau_extra
};

/// Ordering of the active hyperparameters inside a flat vector.
class HyperLayout {
 public:
  explicit HyperLayout(const ModelSpec& spec);

  std::size_t size() const { return kinds_.size(); }
  HyperKind kind(std::size_t i) const { return kinds_[i]; }
  /// Row labels of the run report, e.g. "Precision Gaussian", "PACF1", "log tau".
  std::string name(std::size_t i) const;
  /// Internal-scale label, e.g. "log_prec_gauss".
  std::string internal_name(std::size_t i) const;

  Vector pack(const HyperParams& h) const;
  HyperParams unpack(const Vector& v) const;
  /// Throws InvalidArgument if an inactive entry is set or an active one missing.
  void check(const HyperParams& h) const;

 private:
  std::vector<HyperKind> kinds_;
  std::vector<int> extra_index_;
};

struct BlockRange {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

struct LatentLayout {
  std::optional<BlockRange> trend, seasonal, cycle, spatial, intercept, betas;
  Eigen::Index size = 0;

  std::vector<BlockRange> blocks() const;
};

LatentLayout make_latent_layout(const ModelSpec& spec, int periods, int n_vertices);

/// Observation index of one design row.
struct ObservationRef {
  int station = 0;
  int period = 0;
};

/// Joint latent Gaussian model for one dataset: layout, design, data and the
/// fixed ingredients needed to evaluate the prior for any hyperparameters.
struct JointGMRF {
  ModelSpec spec;
  LatentLayout layout;
  int periods = 0;
  int n_vertices = 0;
  SparseMatrix design;             // n_obs x layout.size
  Vector y;                        // observed values, design row order
  std::vector<ObservationRef> observations;
  Matrix station_covariates;       // n_stations x p
  Matrix constraints;              // k x layout.size, rows C with C x = 0
  std::shared_ptr<const FemMatrices> fem;
  Matrix tau_basis;                // n_vertices x nonstationary terms
  SparseMatrix design_gram;        // design' * design

  Eigen::Index n_obs() const { return y.size(); }
};

/// Builds the design (one row per non-missing value) and constraint set.
/// Throws DataError when a station lacks a requested covariate.
JointGMRF build_design(const Dataset& dataset, const ModelSpec& spec, const Projector& projector);

/// Block-diagonal prior over the layout of (spec, periods, n_vertices).
SparsePrecision prior_precision(const ModelSpec& spec, const HyperParams& hyper,
                                const FemMatrices* fem, int periods,
                                const Matrix* tau_basis = nullptr);

struct GaussianPosterior {
  Vector mean;                 // constrained posterior mean
  SparsePrecision precision;   // unconstrained posterior precision
  SparseCholesky cholesky;
  Matrix constraint_solve;     // Q^{-1} C'
  Matrix constraint_gram;      // C Q^{-1} C'
  double log_det_precision = 0.0;

  /// diag(Q^{-1}) corrected for the constraints.
  Vector marginal_variances() const;
};

/// Exact conditional posterior of the latent field. Linear constraints are
/// applied by conditioning by kriging. Throws NumericalError on failure,
/// reporting the smallest pivot.
GaussianPosterior gaussian_posterior(const JointGMRF& gmrf, const SparsePrecision& prior,
                                     const Vector& y, double log_prec_gauss,
                                     std::shared_ptr<const SparseCholesky::Ordering> ordering = nullptr);

/// Fixed, hyperparameter-independent pieces of the prior log-determinant.
struct PriorConstants {
  double rw1_log_pdet = 0.0;
  int rw1_rank = 0;
  double seasonal_log_pdet = 0.0;  // on the constraint subspace
  int seasonal_rank = 0;
  std::shared_ptr<const SparseCholesky::Ordering> spatial_ordering;
  std::shared_ptr<const SparseCholesky::Ordering> posterior_ordering;
};

PriorConstants prior_constants(const JointGMRF& gmrf);

/// Prior precision together with its log generalised determinant restricted
/// to the constraint subspace and the matching rank.
struct PriorEvaluation {
  SparsePrecision precision;
  double log_pdet = 0.0;
  Eigen::Index rank = 0;
};

PriorEvaluation evaluate_prior(const JointGMRF& gmrf, const PriorConstants& constants,
                               const HyperParams& hyper);

/// log pi(y | theta) for the Gaussian observation model, computed from the
/// prior and posterior determinants at the constrained posterior mean.
double log_evidence(const JointGMRF& gmrf, const PriorEvaluation& prior,
                    const HyperParams& hyper, const GaussianPosterior& post);

/// Per-vertex tau basis helpers used by non-stationary models.
Matrix coordinate_basis(const TriangulatedMesh& mesh, const std::vector<std::string>& columns,
                        const Dataset* dataset = nullptr);

}  // namespace stsm
