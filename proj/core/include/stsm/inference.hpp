#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stsm/model.hpp"

namespace stsm {

/// Prior on one internal-scale hyperparameter.
///
/// `log_gamma`: exp(theta) ~ Gamma(shape, rate), density taken on theta
/// (this is also the gamma prior on a precision including its Jacobian).
/// `gaussian`: theta ~ N(mean, 1 / precision).
struct HyperPrior {
  enum class Family { log_gamma, gaussian };
  Family family = Family::gaussian;
  double a = 0.0;  // shape or mean
  double b = 1.0;  // rate or precision

  static HyperPrior log_gamma(double shape, double rate);
  static HyperPrior gaussian(double mean, double precision);

  double log_density(double theta) const;
  std::string describe() const;
};

/// One prior per entry of a HyperLayout.
struct PriorSet {
  std::vector<HyperPrior> entries;

  double log_density(const Vector& theta) const;
};

struct PriorOptions {
  double precision_shape = 1.0;
  double precision_rate = 5e-5;
  double pacf_precision = 0.15;
  /// Spatial defaults: log-gamma priors whose modes sit at the (log tau,
  /// log kappa) implied by a field of sd sigma0 and range rho0.
  double sigma0 = 1.0;
  double rho0 = 1.0;
  double spatial_shape = 1.0;
  double theta_tau_precision = 1.0;
};

PriorSet make_priors(const ModelSpec& spec, const PriorOptions& options);

/// Evaluates log pi(theta | y) up to a constant for one model. Holds the
/// hyperparameter-independent pieces so repeated calls stay cheap.
class ThetaPosterior {
 public:
  ThetaPosterior(const JointGMRF& gmrf, PriorSet priors);

  const JointGMRF& model() const { return *gmrf_; }
  const HyperLayout& layout() const { return layout_; }
  const PriorSet& priors() const { return priors_; }
  std::size_t dim() const { return layout_.size(); }

  /// log pi(y | theta) + log prior(theta); -inf when theta is out of bounds
  /// or the factorization fails (the reason is kept in last_failure()).
  double operator()(const Vector& theta) const;
  double log_evidence(const Vector& theta) const;
  GaussianPosterior posterior(const Vector& theta) const;

  bool in_bounds(const Vector& theta) const;
  const std::string& last_failure() const { return last_failure_; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  const JointGMRF* gmrf_;
  HyperLayout layout_;
  PriorSet priors_;
  PriorConstants constants_;
  mutable std::string last_failure_;
  mutable std::size_t evaluations_ = 0;
};

/// Convenience wrapper around ThetaPosterior for a single evaluation. `y`
/// replaces the observations stored in the model.
double log_posterior_theta(const JointGMRF& gmrf, const Vector& y, const HyperParams& theta,
                           const PriorSet& priors);

using LogDensity = std::function<double(const Vector&)>;

struct OptimizerOptions {
  double gradient_step = 1e-4;
  double gradient_tolerance = 1e-4;
  int max_iterations = 200;
  double hessian_step = 1e-3;
  double eigenvalue_floor = 1e-6;
  double max_step = 2.0;  // largest coordinate move per iteration
};

struct OptimizationResult {
  Vector mode;
  double log_density = 0.0;
  Matrix hessian;  // negative Hessian of the log density, floored to SPD
  int iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::string message;
};

/// BFGS on -f with central-difference gradients; returns the best iterate
/// when it fails to converge (converged = false).
OptimizationResult optimize_theta(const LogDensity& f, const Vector& init,
                                  const OptimizerOptions& options = {});

/// Central-difference negative Hessian of f at x.
Matrix numerical_negative_hessian(const LogDensity& f, const Vector& x, double step,
                                  double fx);
/// Symmetric eigen-decomposition with eigenvalues raised to at least `floor`.
Matrix floor_eigenvalues(const Matrix& h, double floor);

struct ThetaGrid {
  std::vector<Vector> points;
  std::vector<double> log_posterior;
  std::vector<double> weights;  // normalized
  Vector mode;
  Matrix hessian;
  double delta = 1.0;
  double cutoff = 2.5;
  std::size_t evaluations = 0;
  bool truncated = false;

  /// Lattice geometry: theta = mode + axes * (scale * z), with the scale of
  /// each axis chosen by the sign of z. Empty when the grid was built by hand.
  Matrix axes;
  Vector scale_pos;
  Vector scale_neg;
  std::vector<Vector> z;
  /// Log volume of each point's cell relative to the unscaled lattice.
  std::vector<double> log_volume;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(mode.size()); }
};

struct GridOptions {
  double delta = 1.0;
  double cutoff = 2.5;
  std::size_t max_points = 20000;
  /// Stretch each half-axis so the log density drop at sqrt(2) standardized
  /// units matches the Gaussian one.
  bool skew_correction = true;
};

/// Integer lattice in the Hessian eigenbasis, theta = mode + delta V L^{-1/2} S z
/// with S the per-half-axis scales, grown outwards from the mode while the
/// log density stays within `cutoff` of its value at the mode.
ThetaGrid explore_grid(const LogDensity& f, const Vector& mode, const Matrix& hessian,
                       const GridOptions& options = {});

/// Recomputes normalized weights from log_posterior and the cell volumes.
void normalize_weights(ThetaGrid& grid);

struct MarginalSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
  double mode = 0.0;
};

/// Summaries of sum_k w_k N(means_k, sds_k^2).
MarginalSummary summarize_mixture(const std::vector<double>& weights, const Vector& means,
                                  const Vector& sds);

/// Per-grid-point conditional posteriors.
struct GridComponents {
  std::vector<Vector> means;
  std::vector<Vector> variances;       // empty when not requested
  std::vector<double> expected_sse;    // E ||y - A x||^2 per point, needs variances
};

GridComponents grid_components(const ThetaPosterior& post, const ThetaGrid& grid,
                               bool with_variances);

std::vector<MarginalSummary> latent_marginals(const ThetaGrid& grid, const GridComponents& comps);
Vector latent_mixture_mean(const ThetaGrid& grid, const GridComponents& comps);

struct HyperSummary {
  std::string name;           // report label
  std::string internal_name;
  MarginalSummary internal;   // on the optimisation scale
  MarginalSummary user;       // precisions, PACFs and spatial parameters
};

std::vector<HyperSummary> hyper_marginals(const ThetaGrid& grid, const HyperLayout& layout);

/// Maps an internal-scale value to the reporting scale for this kind.
double to_user_scale(HyperKind kind, double theta);

double marginal_likelihood(const ThetaGrid& grid);

struct DicResult {
  double dic = 0.0;
  double mean_deviance = 0.0;
  double effective_parameters = 0.0;
};

DicResult dic(const ThetaPosterior& post, const ThetaGrid& grid, const GridComponents& comps);

struct InlaOptions {
  OptimizerOptions optimizer;
  GridOptions grid;
  /// Quantiles and modes for every latent index; means and sds are always kept.
  bool latent_quantiles = true;
};

struct InlaResult {
  std::vector<std::string> hyper_names;
  ThetaGrid theta_grid;
  OptimizationResult optimization;
  std::vector<HyperSummary> hyper;
  Vector latent_mean;
  Vector latent_sd;
  std::vector<MarginalSummary> latent;  // empty unless latent_quantiles
  double log_marginal_likelihood = 0.0;
  DicResult dic;
  LatentLayout layout;
  HyperParams mean_hyper;  // posterior means on the internal scale
};

/// Initial values from the data scale: noise and innovation precisions at
/// 4 / var(y), PACFs at zero and spatial parameters at their prior modes.
Vector default_initial_theta(const ThetaPosterior& post);

InlaResult fit_inla(const ThetaPosterior& post, const InlaOptions& options = {},
                    const Vector* init = nullptr);

/// Plain-text report: hyperparameter table with columns
/// `mean sd 0.025q 0.5q 0.975q mode`, marginal likelihood, DIC and counts.
std::string format_report(const InlaResult& result);

}  // namespace stsm
