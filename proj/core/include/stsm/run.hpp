#pragma once

#include <memory>
#include <string>
#include <vector>

#include "stsm/config.hpp"
#include "stsm/inference.hpp"
#include "stsm/predict.hpp"
#include "stsm/simulate.hpp"

namespace stsm {

/// Mesh for a station set: absolute sizes from the config when given,
/// otherwise fractions of the station bounding-box diagonal.
TriangulatedMesh mesh_for_stations(const RunConfig& config, const std::vector<Station>& stations);

/// Everything the engine needs for one dataset. Not copyable: the design
/// refers to FEM matrices owned here.
struct PreparedModel {
  Dataset data;
  TriangulatedMesh mesh;
  std::shared_ptr<const FemMatrices> fem;
  JointGMRF gmrf;
  PriorSet priors;
};

/// Builds mesh, projector, design and priors. Spatial prior defaults:
/// sigma0 = 1 and rho0 = 20% of the mesh diameter unless configured.
std::unique_ptr<PreparedModel> prepare_model(const RunConfig& config, Dataset data);

struct FitOutput {
  std::unique_ptr<PreparedModel> model;
  InlaResult result;
};

FitOutput fit_dataset(const RunConfig& config, Dataset data);

/// Writes the run directory (hyperparameter table, component series,
/// spatial effect, fixed effects, latent summaries, mesh, stations, summary).
void write_run(const std::string& dir, const RunConfig& config, const FitOutput& fit,
               const IngestReport* ingest = nullptr);

/// Reads a run directory back into a predictor. Throws ConfigError when
/// artifacts are missing.
FittedModel load_run(const std::string& dir, RunConfig* config = nullptr);

/// ingest -> fit -> write_run into config.output.
FitOutput run_fit(const RunConfig& config);

/// Simulation from the `sim.` keys and the model keys of the config.
SimulationResult run_simulation(const RunConfig& config, TriangulatedMesh* mesh_out = nullptr);

/// Leading comment carried by every output file.
std::string config_comment(const RunConfig& config);

struct ForecastRow {
  std::string station_id;
  Period period;
  int horizon = 0;
  double mean = 0.0;
  double sd = 0.0;
  double naive = 0.0;
};

void write_forecast(std::ostream& out, const FittedModel& model, const ForecastResult& fc,
                    const std::string& comment);
std::vector<ForecastRow> read_forecast(std::istream& in);

/// One metrics row per horizon, matching forecasts to observed quarterly
/// values by station and period; the naive reference is the last in-sample value.
std::vector<ForecastMetrics> metrics_by_horizon(const std::vector<ForecastRow>& rows, const Dataset& observed);

}  // namespace stsm
