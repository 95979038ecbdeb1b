#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "stsm/dataset.hpp"
#include "stsm/inference.hpp"
#include "stsm/mesh.hpp"
#include "stsm/model.hpp"

namespace stsm {

/// Plug-in hyperparameters on the reporting scale (posterior means).
struct PlugInHyper {
  double prec_gauss = 1.0;
  double prec_trend = 1.0;
  double prec_seasonal = 1.0;
  double prec_cycle = 1.0;
  double pacf1 = 0.0;
  double pacf2 = 0.0;
};

/// Everything needed to predict from a completed fit.
struct FittedModel {
  ModelSpec spec;
  LatentLayout layout;
  std::vector<Period> times;
  std::vector<Station> stations;
  Vector last_observed;  // per station, NaN when a station was never observed
  TriangulatedMesh mesh; // empty without a spatial block
  Vector latent_mean;
  Vector latent_sd;
  PlugInHyper hyper;

  int periods() const { return static_cast<int>(times.size()); }
};

FittedModel make_fitted_model(const Dataset& data, const JointGMRF& gmrf, const InlaResult& result,
                              const TriangulatedMesh* mesh);

/// Posterior mean of the linear predictor at station s in period t; equals
/// the corresponding design row times the latent mean.
double station_fitted_value(const FittedModel& model, std::size_t station, int period);

struct GridRequest {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  int nx = 2, ny = 2;
  int period = 0;  // index into the fitted time axis
  /// ny x nx raster per model covariate (row 0 at ymin).
  std::map<std::string, Matrix> covariates;

  Point2D node(int ix, int iy) const;
};

/// Node-based raster; NaN marks cells outside the inner mesh.
struct SurfaceGrid {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  Matrix mean;  // ny x nx
  Matrix sd;

  int nx() const { return static_cast<int>(mean.cols()); }
  int ny() const { return static_cast<int>(mean.rows()); }
};

/// Posterior mean surface: trend, seasonal and cycle of the period plus the
/// covariate effect and the interpolated spatial field. The sd treats the
/// blocks as independent.
SurfaceGrid fitted_surface(const FittedModel& model, const GridRequest& request);

/// Text raster: `ncols NX nrows NY xmin X xmax X ymin Y ymax Y`, then NY rows
/// of NX values starting at ymin, `NA` for no-data.
void write_grid(std::ostream& out, const Matrix& values, const SurfaceGrid& frame);
SurfaceGrid read_grid(std::istream& in);

/// sum_k beta_k * mean_k: shift that turns a covariate-adjusted trend into
/// the trend of the regional average.
double covariate_adjustment(const Vector& beta, const Vector& covariate_means);

struct ComponentForecast {
  Vector mean;      // one entry per step
  Vector variance;
};

struct ForecastResult {
  int horizon = 0;
  std::vector<Period> times;
  ComponentForecast trend;     // intercept for constant-mean models
  ComponentForecast seasonal;
  ComponentForecast cycle;
  Matrix station_mean;         // n_stations x horizon
  Matrix station_sd;           // predictive, includes observation noise
};

/// h-step-ahead forecast with plug-in hyperparameters. Throws
/// InvalidArgument for h < 1.
ForecastResult forecast(const FittedModel& model, int h);

/// Linear recursion x_t = sum_i coef_i x_{t-i} + eta with innovation variance
/// `innovation_var`, started from `last` (most recent first) whose entries have
/// independent variances `last_var`.
ComponentForecast forecast_recursion(const Vector& coef, const Vector& last, const Vector& last_var,
                                     double innovation_var, int h);

struct ForecastMetrics {
  double me = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double mpe = 0.0;
  double mape = 0.0;
  double acf1 = 0.0;
  double theils_u = 0.0;
};

/// Column header of the metrics table.
extern const char* const kMetricsHeader;

/// Errors are e = observed - predicted. Theil's U compares against the
/// naive no-change forecast of the observed series (both RMSEs over t >= 2).
ForecastMetrics forecast_metrics(const Vector& predicted, const Vector& observed);
/// Same, with an explicit naive reference forecast for Theil's U.
ForecastMetrics forecast_metrics(const Vector& predicted, const Vector& observed, const Vector& naive);

std::string format_metrics_row(const ForecastMetrics& m);

}  // namespace stsm
