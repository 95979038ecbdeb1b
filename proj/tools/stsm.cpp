#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stsm/config.hpp"
#include "stsm/errors.hpp"
#include "stsm/run.hpp"

namespace {

using namespace stsm;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

int parse_period(const std::string& text, const std::vector<Period>& times) {
  const auto q = text.find_first_of("Qq");
  if (q == std::string::npos) {
    std::size_t used = 0;
    int idx = 0;
    try {
      idx = std::stoi(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || idx < 0 || idx >= static_cast<int>(times.size())) {
      throw ConfigError("period '" + text + "' is neither YYYYQn nor an index into the fitted periods");
    }
    return idx;
  }
  const Period p{std::stoi(text.substr(0, q)), std::stoi(text.substr(q + 1))};
  for (std::size_t t = 0; t < times.size(); ++t) {
    if (times[t] == p) return static_cast<int>(t);
  }
  throw ConfigError("period '" + text + "' is outside the fitted range");
}

void write_truth(const std::string& path, const SimulationResult& sim, const RunConfig& config) {
  auto out = open_output(path);
  out << "# " << config_comment(config) << '\n' << "year,quarter,trend,seasonal,cycle\n";
  for (std::size_t t = 0; t < sim.data.times.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g", sim.data.times[t].year, sim.data.times[t].quarter,
                  sim.truth.trend[i], sim.truth.seasonal[i], sim.truth.cycle[i]);
    out << buf << '\n';
  }
}

Dataset slice_periods(const Dataset& d, int first, int count) {
  Dataset out;
  out.variable = d.variable;
  out.units = d.units;
  out.stations = d.stations;
  out.times.assign(d.times.begin() + first, d.times.begin() + first + count);
  out.values = d.values.middleCols(first, count);
  return out;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path, const std::string& truth_path,
                 int holdout, const std::string& holdout_path) {
  const RunConfig config = load_config(config_path);
  TriangulatedMesh mesh;
  const SimulationResult sim = run_simulation(config, &mesh);
  const int T = static_cast<int>(sim.data.n_periods());
  if (holdout < 0 || holdout >= T - 1) throw ConfigError("--holdout must leave at least two fitted periods");
  if (holdout > 0 && holdout_path.empty()) throw ConfigError("--holdout needs --holdout-out");
  const std::string comment = config_comment(config);
  {
    auto out = open_output(out_path);
    write_csv(out, slice_periods(sim.data, 0, T - holdout), config.aggregation, comment);
  }
  if (holdout > 0) {
    auto out = open_output(holdout_path);
    write_csv(out, slice_periods(sim.data, T - holdout, holdout), config.aggregation, comment);
  }
  if (!truth_path.empty()) write_truth(truth_path, sim, config);
  std::cout << "simulated " << sim.data.n_stations() << " stations x " << T << " periods, "
            << sim.data.n_observed() << " observed\n";
  return 0;
}

int cmd_fit(const std::string& config_path, const std::string& output) {
  RunConfig config = load_config(config_path);
  if (!output.empty()) config.output = output;
  if (config.inputs.empty()) throw ConfigError("config: 'input' is required for fit");
  const FitOutput fit = run_fit(config);
  std::cout << format_report(fit.result);
  std::cout << "run written to " << config.output << '\n';
  return 0;
}

int cmd_predict_grid(const std::string& run, const std::string& period, int nx, int ny,
                     const std::vector<double>& bbox, const std::vector<std::string>& rasters,
                     const std::string& out_path, const std::string& sd_path) {
  RunConfig config;
  const FittedModel model = load_run(run, &config);
  GridRequest req;
  req.period = parse_period(period, model.times);
  req.nx = nx;
  req.ny = ny;
  if (bbox.empty()) {
    req.xmin = req.ymin = INFINITY;
    req.xmax = req.ymax = -INFINITY;
    for (const auto& s : model.stations) {
      req.xmin = std::min(req.xmin, s.location.x);
      req.xmax = std::max(req.xmax, s.location.x);
      req.ymin = std::min(req.ymin, s.location.y);
      req.ymax = std::max(req.ymax, s.location.y);
    }
  } else {
    if (bbox.size() != 4) throw ConfigError("--bbox takes xmin,xmax,ymin,ymax");
    req.xmin = bbox[0];
    req.xmax = bbox[1];
    req.ymin = bbox[2];
    req.ymax = bbox[3];
  }
  for (const auto& r : rasters) {
    const auto eq = r.find('=');
    if (eq == std::string::npos) throw ConfigError("--raster expects name=path");
    std::ifstream in(r.substr(eq + 1));
    if (!in) throw ConfigError("cannot read raster '" + r.substr(eq + 1) + "'");
    const SurfaceGrid g = read_grid(in);
    if (g.nx() != nx || g.ny() != ny) throw DataError("raster '" + r + "' does not match the grid size");
    req.covariates[r.substr(0, eq)] = g.mean;
  }
  const SurfaceGrid surface = fitted_surface(model, req);
  {
    auto out = open_output(out_path);
    write_grid(out, surface.mean, surface);
  }
  if (!sd_path.empty()) {
    auto out = open_output(sd_path);
    write_grid(out, surface.sd, surface);
  }
  return 0;
}

int cmd_forecast(const std::string& run, int horizon, const std::string& out_path) {
  RunConfig config;
  const FittedModel model = load_run(run, &config);
  const ForecastResult fc = forecast(model, horizon);
  auto out = open_output(out_path);
  write_forecast(out, model, fc, config_comment(config));
  return 0;
}

int cmd_metrics(const std::string& run, const std::string& observed, const std::string& forecast_path,
                const std::string& out_path) {
  RunConfig config;
  load_run(run, &config);
  IngestOptions io;
  io.aggregation = config.aggregation;
  io.min_months = config.min_months;
  io.variable = config.variable;
  const Dataset obs = ingest_csv({observed}, io);
  std::ifstream fin(forecast_path);
  if (!fin) throw ConfigError("cannot read forecast '" + forecast_path + "'");
  const auto rows = read_forecast(fin);
  const auto metrics = metrics_by_horizon(rows, obs);
  std::ofstream file;
  if (!out_path.empty()) file = open_output(out_path);
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "# " << config_comment(config) << '\n';
  out << "horizon " << kMetricsHeader << '\n';
  for (std::size_t h = 0; h < metrics.size(); ++h) out << h + 1 << ' ' << format_metrics_row(metrics[h]) << '\n';
  return 0;
}

int cmd_mesh_info(const std::string& config_path, const std::string& run, const std::string& out_path) {
  TriangulatedMesh mesh;
  RunConfig config;
  if (!run.empty()) {
    std::ifstream in(run + "/mesh.txt");
    if (!in) throw ConfigError("run '" + run + "' has no mesh.txt");
    mesh = read_mesh(in);
  } else {
    if (config_path.empty()) throw ConfigError("mesh-info needs --config or --run");
    config = load_config(config_path);
    IngestOptions io;
    io.aggregation = config.aggregation;
    io.min_months = config.min_months;
    std::vector<Station> stations;
    if (!config.inputs.empty()) {
      stations = ingest_csv(config.inputs, io).stations;
    } else {
      stations = random_stations(config.sim.stations, config.sim.width, config.sim.height, config.seed);
    }
    mesh = mesh_for_stations(config, stations);
  }
  const MeshStats st = mesh_stats(mesh);
  std::size_t inner = 0;
  for (const bool b : mesh.inner_flag) inner += b ? 1 : 0;
  std::cout << "vertices " << st.n_vertices << "\ninner_vertices " << inner << "\ntriangles " << st.n_triangles
            << "\nmin_angle_deg " << st.min_angle << "\nmax_edge " << st.max_edge << '\n';
  if (!out_path.empty()) {
    auto out = open_output(out_path);
    if (run.empty()) out << "# " << config_comment(config) << '\n';
    write_mesh(out, mesh);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal structural decomposition of station records"};
  app.require_subcommand(1);

  std::string config_path, out_path, truth_path, holdout_path, run, period, sd_path, observed, forecast_path;
  std::string output;
  int holdout = 0, nx = 50, ny = 50, horizon = 4;
  std::vector<double> bbox;
  std::vector<std::string> rasters;

  auto* sim = app.add_subcommand("simulate", "Draw a synthetic dataset from the model");
  sim->add_option("--config", config_path, "Configuration file")->required();
  sim->add_option("--out", out_path, "Monthly CSV to write")->required();
  sim->add_option("--truth", truth_path, "Write the true components per period");
  sim->add_option("--holdout", holdout, "Withhold the last N periods");
  sim->add_option("--holdout-out", holdout_path, "CSV for the withheld periods");

  auto* fit = app.add_subcommand("fit", "Fit a model and write a run directory");
  fit->add_option("--config", config_path, "Configuration file")->required();
  fit->add_option("--output", output, "Run directory (overrides the config)");

  auto* grid = app.add_subcommand("predict-grid", "Fitted surface on a regular grid");
  grid->add_option("--run", run, "Run directory")->required();
  grid->add_option("--period", period, "YYYYQn or period index")->required();
  grid->add_option("--nx", nx, "Grid columns")->check(CLI::PositiveNumber);
  grid->add_option("--ny", ny, "Grid rows")->check(CLI::PositiveNumber);
  grid->add_option("--bbox", bbox, "xmin,xmax,ymin,ymax")->delimiter(',');
  grid->add_option("--raster", rasters, "Covariate raster as name=path");
  grid->add_option("--out", out_path, "Mean surface")->required();
  grid->add_option("--sd-out", sd_path, "Posterior sd surface");

  auto* fc = app.add_subcommand("forecast", "Forecast every station h quarters ahead");
  fc->add_option("--run", run, "Run directory")->required();
  fc->add_option("--horizon", horizon, "Steps ahead")->check(CLI::PositiveNumber);
  fc->add_option("--out", out_path, "Forecast CSV")->required();

  auto* met = app.add_subcommand("metrics", "Accuracy of a forecast against observations");
  met->add_option("--run", run, "Run directory")->required();
  met->add_option("--observed", observed, "Monthly CSV with the held-out observations")->required();
  met->add_option("--forecast", forecast_path, "Forecast CSV")->required();
  met->add_option("--out", out_path, "Metrics table (default stdout)");

  auto* mi = app.add_subcommand("mesh-info", "Build or load a mesh and print its statistics");
  mi->add_option("--config", config_path, "Configuration file");
  mi->add_option("--run", run, "Run directory");
  mi->add_option("--out", out_path, "Write the mesh");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(config_path, out_path, truth_path, holdout, holdout_path);
    if (*fit) return cmd_fit(config_path, output);
    if (*grid) return cmd_predict_grid(run, period, nx, ny, bbox, rasters, out_path, sd_path);
    if (*fc) return cmd_forecast(run, horizon, out_path);
    if (*met) return cmd_metrics(run, observed, forecast_path, out_path);
    if (*mi) return cmd_mesh_info(config_path, run, out_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
