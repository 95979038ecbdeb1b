#include "stsm/run.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "stsm/errors.hpp"
#include "stsm/temporal.hpp"

namespace stsm {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_num(const std::string& s, const std::string& where) {
  if (s == "NA") return kNaN;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError(where + ": bad number '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("missing run artifact '" + p.string() + "'");
  return in;
}

// Rows of a CSV file with header, skipping comment lines.
std::vector<std::vector<std::string>> read_rows(const fs::path& p, const std::string& header) {
  std::ifstream in = open_in(p);
  std::string line;
  bool seen = false;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!seen) {
      if (line != header) throw DataError(p.string() + ": expected header '" + header + "'");
      seen = true;
      continue;
    }
    rows.push_back(split_csv(line));
  }
  if (!seen) throw DataError(p.string() + ": missing header");
  return rows;
}

std::map<std::string, std::string> read_key_values(const fs::path& p) {
  std::ifstream in = open_in(p);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

double bbox_diagonal(const std::vector<Point2D>& pts) {
  double x0 = pts.front().x, x1 = x0, y0 = pts.front().y, y1 = y0;
  for (const auto& p : pts) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return std::hypot(x1 - x0, y1 - y0);
}

MarginalSummary gaussian_summary(double mean, double sd) {
  return {mean, sd, mean - 1.959963984540054 * sd, mean, mean + 1.959963984540054 * sd, mean};
}

MarginalSummary latent_summary(const InlaResult& r, Eigen::Index i) {
  if (!r.latent.empty()) return r.latent[static_cast<std::size_t>(i)];
  return gaussian_summary(r.latent_mean[i], r.latent_sd[i]);
}

std::string period_label(const Period& p) { return std::to_string(p.year) + "," + std::to_string(p.quarter); }

}  // namespace

std::string config_comment(const RunConfig& config) { return "config_hash=" + config.hash(); }

TriangulatedMesh mesh_for_stations(const RunConfig& config, const std::vector<Station>& stations) {
  std::vector<Point2D> pts;
  for (const auto& s : stations) pts.push_back(s.location);
  if (pts.size() < 3) throw DataError("mesh: need at least 3 stations");
  MeshOptions opt = config.mesh;
  if (!config.mesh_sizes_given) {
    const double diag = bbox_diagonal(pts);
    opt.max_edge_inner = config.mesh_inner_fraction * diag;
    opt.max_edge_outer = std::max(2.0 * opt.max_edge_inner, config.mesh_outer_fraction * diag);
    opt.extension_margin = config.mesh_margin_fraction * diag;
  }
  return build_mesh(pts, opt);
}

std::unique_ptr<PreparedModel> prepare_model(const RunConfig& config, Dataset data) {
  auto pm = std::make_unique<PreparedModel>();
  pm->data = std::move(data);
  const ModelSpec& spec = config.spec;
  Projector proj;
  PriorOptions priors = config.priors;
  if (spec.spatial != SpatialMode::off) {
    pm->mesh = mesh_for_stations(config, pm->data.stations);
    pm->fem = std::make_shared<const FemMatrices>(assemble_fem(pm->mesh));
    proj = barycentric_projector(pm->mesh, pm->data.locations());
    if (!config.sigma0_given) priors.sigma0 = 1.0;
    if (!config.rho0_given) priors.rho0 = 0.2 * bbox_diagonal(pm->mesh.vertices);
  }
  pm->gmrf = build_design(pm->data, spec, proj);
  pm->gmrf.fem = pm->fem;
  if (spec.nonstationary_tau_terms > 0) {
    pm->gmrf.tau_basis = coordinate_basis(pm->mesh, config.tau_basis, &pm->data);
  }
  pm->priors = make_priors(spec, priors);
  return pm;
}

FitOutput fit_dataset(const RunConfig& config, Dataset data) {
  FitOutput out;
  out.model = prepare_model(config, std::move(data));
  const ThetaPosterior post(out.model->gmrf, out.model->priors);
  out.result = fit_inla(post, config.inla);
  return out;
}

void write_run(const std::string& dir_name, const RunConfig& config, const FitOutput& fit,
               const IngestReport* ingest) {
  const fs::path dir(dir_name);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create run directory '" + dir_name + "': " + ec.message());
  const std::string comment = "# " + config_comment(config) + "\n";
  const PreparedModel& pm = *fit.model;
  const InlaResult& r = fit.result;
  const LatentLayout& lay = pm.gmrf.layout;
  const auto& times = pm.data.times;

  {
    auto out = open_out(dir / "config.txt");
    out << comment;
    for (const auto& [k, v] : config.entries) out << k << " = " << v << '\n';
  }
  {
    auto out = open_out(dir / "hyperparameters.txt");
    out << comment << format_report(r);
  }
  {
    auto out = open_out(dir / "hyperparameters.csv");
    out << comment << "name,internal_name,mean,sd,q025,q50,q975,mode,internal_mean,internal_sd\n";
    for (const auto& h : r.hyper) {
      out << h.name << ',' << h.internal_name << ',' << num(h.user.mean) << ',' << num(h.user.sd) << ','
          << num(h.user.q025) << ',' << num(h.user.q50) << ',' << num(h.user.q975) << ',' << num(h.user.mode)
          << ',' << num(h.internal.mean) << ',' << num(h.internal.sd) << '\n';
    }
  }
  {
    auto out = open_out(dir / "components.csv");
    out << comment << "component,year,quarter,mean,sd,q025,q50,q975\n";
    for (const auto* b : {&lay.trend, &lay.seasonal, &lay.cycle}) {
      if (!*b) continue;
      for (Eigen::Index t = 0; t < (*b)->size; ++t) {
        const MarginalSummary s = latent_summary(r, (*b)->offset + t);
        out << (*b)->name << ',' << period_label(times[static_cast<std::size_t>(t)]) << ',' << num(s.mean) << ','
            << num(s.sd) << ',' << num(s.q025) << ',' << num(s.q50) << ',' << num(s.q975) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "fixed_effects.csv");
    out << comment << "name,mean,sd,q025,q50,q975,mode\n";
    auto row = [&](const std::string& name, Eigen::Index i) {
      const MarginalSummary s = latent_summary(r, i);
      out << name << ',' << num(s.mean) << ',' << num(s.sd) << ',' << num(s.q025) << ',' << num(s.q50) << ','
          << num(s.q975) << ',' << num(s.mode) << '\n';
    };
    if (lay.intercept) row("intercept", lay.intercept->offset);
    for (std::size_t k = 0; k < pm.gmrf.spec.covariates.size(); ++k) {
      row(pm.gmrf.spec.covariates[k], lay.betas->offset + static_cast<Eigen::Index>(k));
    }
  }
  if (lay.spatial) {
    auto out = open_out(dir / "spatial.csv");
    out << comment << "vertex,replicate,x,y,inner,mean,sd\n";
    const auto nv = static_cast<Eigen::Index>(pm.mesh.n_vertices());
    const Eigen::Index copies = lay.spatial->size / nv;
    for (Eigen::Index c = 0; c < copies; ++c) {
      for (Eigen::Index v = 0; v < nv; ++v) {
        const Eigen::Index i = lay.spatial->offset + c * nv + v;
        const Point2D& p = pm.mesh.vertices[static_cast<std::size_t>(v)];
        out << v << ',' << c << ',' << num(p.x) << ',' << num(p.y) << ','
            << (pm.mesh.inner_flag[static_cast<std::size_t>(v)] ? 1 : 0) << ',' << num(r.latent_mean[i]) << ','
            << num(r.latent_sd[i]) << '\n';
      }
    }
    auto mesh_out = open_out(dir / "mesh.txt");
    mesh_out << comment;
    write_mesh(mesh_out, pm.mesh);
  }
  {
    auto out = open_out(dir / "latent.csv");
    out << comment << "index,block,position,mean,sd\n";
    for (const auto& b : lay.blocks()) {
      for (Eigen::Index j = 0; j < b.size; ++j) {
        const Eigen::Index i = b.offset + j;
        out << i << ',' << b.name << ',' << j << ',' << num(r.latent_mean[i]) << ',' << num(r.latent_sd[i]) << '\n';
      }
    }
  }
  {
    const FittedModel fm = make_fitted_model(pm.data, pm.gmrf, r, lay.spatial ? &pm.mesh : nullptr);
    auto out = open_out(dir / "stations.csv");
    out << comment << "station_id,lon,lat,altitude,dist_sea_km,last_observed\n";
    for (std::size_t s = 0; s < pm.data.stations.size(); ++s) {
      const Station& st = pm.data.stations[s];
      out << st.id << ',' << num(st.location.x) << ',' << num(st.location.y) << ',' << num(st.altitude) << ','
          << num(st.dist_sea_km) << ',' << num(fm.last_observed[static_cast<Eigen::Index>(s)]) << '\n';
    }
  }
  if (ingest) {
    auto out = open_out(dir / "observed_fraction.csv");
    out << comment << "year,quarter,fraction\n";
    for (std::size_t t = 0; t < ingest->times.size(); ++t) {
      out << period_label(ingest->times[t]) << ',' << num(ingest->observed_fraction[t]) << '\n';
    }
  }
  {
    auto out = open_out(dir / "summary.txt");
    out << comment;
    const auto& o = r.optimization;
    out << "variable = " << pm.data.variable << '\n'
        << "first_period = " << times.front().year << "Q" << times.front().quarter << '\n'
        << "periods = " << times.size() << '\n'
        << "stations = " << pm.data.n_stations() << '\n'
        << "observations = " << pm.gmrf.n_obs() << '\n'
        << "mesh_vertices = " << pm.mesh.n_vertices() << '\n'
        << "latent_dimension = " << lay.size << '\n'
        << "hyperparameters = " << r.hyper.size() << '\n'
        << "log_marginal_likelihood = " << num(r.log_marginal_likelihood) << '\n'
        << "dic = " << num(r.dic.dic) << '\n'
        << "mean_deviance = " << num(r.dic.mean_deviance) << '\n'
        << "effective_parameters = " << num(r.dic.effective_parameters) << '\n'
        << "optimizer_iterations = " << o.iterations << '\n'
        << "optimizer_converged = " << (o.converged ? "true" : "false") << '\n'
        << "optimizer_message = " << (o.message.empty() ? "ok" : o.message) << '\n'
        << "optimizer_evaluations = " << o.evaluations << '\n'
        << "grid_points = " << r.theta_grid.size() << '\n'
        << "grid_evaluations = " << r.theta_grid.evaluations << '\n'
        << "grid_truncated = " << (r.theta_grid.truncated ? "true" : "false") << '\n'
        << "grid_delta = " << num(config.inla.grid.delta) << '\n'
        << "grid_cutoff = " << num(config.inla.grid.cutoff) << '\n'
        << "gradient_step = " << num(config.inla.optimizer.gradient_step) << '\n'
        << "gradient_tolerance = " << num(config.inla.optimizer.gradient_tolerance) << '\n'
        << "hessian_step = " << num(config.inla.optimizer.hessian_step) << '\n'
        << "seed = " << config.seed << '\n';
    for (std::size_t i = 0; i < pm.priors.entries.size(); ++i) {
      out << "prior." << r.hyper[i].internal_name << " = " << pm.priors.entries[i].describe() << '\n';
    }
  }
}

FittedModel load_run(const std::string& dir_name, RunConfig* config_out) {
  const fs::path dir(dir_name);
  if (!fs::is_directory(dir)) throw ConfigError("run directory '" + dir_name + "' does not exist");
  std::ifstream cin = open_in(dir / "config.txt");
  const RunConfig config = parse_config(cin, (dir / "config.txt").string());
  if (config_out) *config_out = config;

  FittedModel m;
  m.spec = config.spec;
  const auto summary = read_key_values(dir / "summary.txt");
  auto need = [&](const char* key) {
    const auto it = summary.find(key);
    if (it == summary.end()) throw ConfigError("summary.txt lacks '" + std::string(key) + "'");
    return it->second;
  };
  const std::string first = need("first_period");
  const auto q = first.find('Q');
  if (q == std::string::npos) throw DataError("summary.txt: bad first_period");
  const Period start{std::stoi(first.substr(0, q)), std::stoi(first.substr(q + 1))};
  const int periods = std::stoi(need("periods"));
  for (int t = 0; t < periods; ++t) m.times.push_back(Period::from_index(start.index() + t));

  const auto srows = read_rows(dir / "stations.csv", "station_id,lon,lat,altitude,dist_sea_km,last_observed");
  m.last_observed.resize(static_cast<Eigen::Index>(srows.size()));
  for (std::size_t i = 0; i < srows.size(); ++i) {
    const auto& f = srows[i];
    if (f.size() != 6) throw DataError("stations.csv: bad row " + std::to_string(i + 1));
    Station s;
    s.id = f[0];
    s.location = {parse_num(f[1], "stations.csv"), parse_num(f[2], "stations.csv")};
    s.altitude = parse_num(f[3], "stations.csv");
    s.dist_sea_km = parse_num(f[4], "stations.csv");
    m.stations.push_back(s);
    m.last_observed[static_cast<Eigen::Index>(i)] = parse_num(f[5], "stations.csv");
  }
  int nv = 0;
  if (m.spec.spatial != SpatialMode::off) {
    std::ifstream min = open_in(dir / "mesh.txt");
    m.mesh = read_mesh(min);
    nv = static_cast<int>(m.mesh.n_vertices());
  }
  m.layout = make_latent_layout(m.spec, periods, nv);
  const auto lrows = read_rows(dir / "latent.csv", "index,block,position,mean,sd");
  if (static_cast<Eigen::Index>(lrows.size()) != m.layout.size) {
    throw DataError("latent.csv: expected " + std::to_string(m.layout.size) + " rows");
  }
  m.latent_mean.resize(m.layout.size);
  m.latent_sd.resize(m.layout.size);
  for (std::size_t i = 0; i < lrows.size(); ++i) {
    m.latent_mean[static_cast<Eigen::Index>(i)] = parse_num(lrows[i].at(3), "latent.csv");
    m.latent_sd[static_cast<Eigen::Index>(i)] = parse_num(lrows[i].at(4), "latent.csv");
  }
  const auto hrows = read_rows(dir / "hyperparameters.csv",
                               "name,internal_name,mean,sd,q025,q50,q975,mode,internal_mean,internal_sd");
  for (const auto& f : hrows) {
    const double mean = parse_num(f.at(2), "hyperparameters.csv");
    const std::string& key = f.at(1);
    if (key == "log_prec_gauss") m.hyper.prec_gauss = mean;
    if (key == "log_prec_trend") m.hyper.prec_trend = mean;
    if (key == "log_prec_seasonal") m.hyper.prec_seasonal = mean;
    if (key == "log_prec_cycle") m.hyper.prec_cycle = mean;
    if (key == "z_pacf1") m.hyper.pacf1 = mean;
    if (key == "z_pacf2") m.hyper.pacf2 = mean;
  }
  return m;
}

FitOutput run_fit(const RunConfig& config) {
  IngestOptions io;
  io.aggregation = config.aggregation;
  io.min_months = config.min_months;
  io.variable = config.variable;
  IngestReport report;
  Dataset data = ingest_csv(config.inputs, io, &report);
  FitOutput fit = fit_dataset(config, std::move(data));
  write_run(config.output, config, fit, &report);
  return fit;
}

SimulationResult run_simulation(const RunConfig& config, TriangulatedMesh* mesh_out) {
  const SimulationSettings& s = config.sim;
  SimulationConfig sc;
  sc.spec = config.spec;
  sc.stations = random_stations(s.stations, s.width, s.height, config.seed);
  sc.periods = s.periods;
  sc.missing_rate = s.missing_rate;
  sc.seed = config.seed;
  sc.intercept = s.intercept;
  sc.trend_level = s.trend_level;
  sc.seasonal_amplitude = s.seasonal_amplitude;
  HyperParams& h = sc.truth;
  h.log_prec_gauss = s.log_prec_gauss;
  if (sc.spec.trend) h.log_prec_trend = s.log_prec_trend;
  if (sc.spec.seasonal) h.log_prec_seasonal = s.log_prec_seasonal;
  if (sc.spec.cycle) {
    h.log_prec_cycle = s.log_prec_cycle;
    h.z_pacf1 = internal_from_pacf(s.pacf1);
    h.z_pacf2 = internal_from_pacf(s.pacf2);
  }
  TriangulatedMesh mesh;
  if (sc.spec.spatial != SpatialMode::off) {
    const MaternParams mp = params_from_sigma_rho(s.sigma, s.range);
    h.log_tau = mp.log_tau;
    h.log_kappa = mp.log_kappa;
    mesh = mesh_for_stations(config, sc.stations);
    const int extra = sc.spec.nonstationary_tau_terms;
    h.theta_tau_extra = Vector::Zero(extra);
    if (extra > 0) {
      if (!s.theta_tau.empty() && static_cast<int>(s.theta_tau.size()) != extra) {
        throw ConfigError("sim.theta_tau needs " + std::to_string(extra) + " values");
      }
      for (std::size_t i = 0; i < s.theta_tau.size(); ++i) h.theta_tau_extra[static_cast<Eigen::Index>(i)] = s.theta_tau[i];
      Dataset tmp;
      tmp.stations = sc.stations;
      sc.tau_basis = coordinate_basis(mesh, config.tau_basis, &tmp);
    }
  }
  sc.beta = Vector::Zero(static_cast<Eigen::Index>(sc.spec.covariates.size()));
  if (!s.beta.empty()) {
    if (s.beta.size() != sc.spec.covariates.size()) throw ConfigError("sim.beta needs one value per covariate");
    for (std::size_t i = 0; i < s.beta.size(); ++i) sc.beta[static_cast<Eigen::Index>(i)] = s.beta[i];
  }
  SimulationResult res = simulate_dataset(sc, mesh);
  res.data.variable = config.variable;
  if (mesh_out) *mesh_out = mesh;
  return res;
}

void write_forecast(std::ostream& out, const FittedModel& model, const ForecastResult& fc,
                    const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "station_id,year,quarter,horizon,mean,sd,naive\n";
  for (std::size_t s = 0; s < model.stations.size(); ++s) {
    const auto i = static_cast<Eigen::Index>(s);
    for (int k = 0; k < fc.horizon; ++k) {
      out << model.stations[s].id << ',' << period_label(fc.times[static_cast<std::size_t>(k)]) << ',' << k + 1
          << ',' << num(fc.station_mean(i, k)) << ',' << num(fc.station_sd(i, k)) << ','
          << num(model.last_observed[i]) << '\n';
    }
  }
}

std::vector<ForecastRow> read_forecast(std::istream& in) {
  std::vector<ForecastRow> rows;
  std::string line;
  bool seen = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!seen) {
      if (line != "station_id,year,quarter,horizon,mean,sd,naive") {
        throw DataError("forecast file: unexpected header");
      }
      seen = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 7) throw DataError("forecast file:" + std::to_string(line_no) + ": expected 7 fields");
    ForecastRow r;
    r.station_id = f[0];
    r.period = {std::stoi(f[1]), std::stoi(f[2])};
    r.horizon = std::stoi(f[3]);
    r.mean = parse_num(f[4], "forecast file");
    r.sd = parse_num(f[5], "forecast file");
    r.naive = parse_num(f[6], "forecast file");
    rows.push_back(r);
  }
  if (!seen) throw DataError("forecast file: missing header");
  return rows;
}

std::vector<ForecastMetrics> metrics_by_horizon(const std::vector<ForecastRow>& rows, const Dataset& observed) {
  std::map<std::string, std::size_t> station_index;
  for (std::size_t s = 0; s < observed.stations.size(); ++s) station_index[observed.stations[s].id] = s;
  int max_h = 0;
  for (const auto& r : rows) max_h = std::max(max_h, r.horizon);
  std::vector<ForecastMetrics> out;
  for (int h = 1; h <= max_h; ++h) {
    std::vector<double> p, o, n;
    for (const auto& r : rows) {
      if (r.horizon != h || std::isnan(r.naive)) continue;
      const auto si = station_index.find(r.station_id);
      if (si == station_index.end()) continue;
      for (std::size_t t = 0; t < observed.times.size(); ++t) {
        if (!(observed.times[t] == r.period)) continue;
        const double v = observed.values(static_cast<Eigen::Index>(si->second), static_cast<Eigen::Index>(t));
        if (std::isnan(v)) continue;
        p.push_back(r.mean);
        o.push_back(v);
        n.push_back(r.naive);
      }
    }
    if (p.size() < 2) {
      out.push_back({kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN});
      continue;
    }
    auto vec = [](const std::vector<double>& v) {
      return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    out.push_back(forecast_metrics(vec(p), vec(o), vec(n)));
  }
  return out;
}

}  // namespace stsm
