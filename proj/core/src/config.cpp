#include "stsm/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "stsm/errors.hpp"

namespace stsm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("config key '" + key + "': " + what + " (got '" + value + "')");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* b = v.data();
  const char* e = b + v.size();
  if (b != e && *b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || ptr != e || !std::isfinite(out)) bad(key, v, "expected a number");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "expected an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  bad(key, v, "expected true or false");
}

double positive(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (!(d > 0)) bad(key, v, "must be positive");
  return d;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["input"] = [](RunConfig& c, const std::string&, const std::string& v) { c.inputs = split_list(v); };
    t["variable"] = [](RunConfig& c, const std::string&, const std::string& v) { c.variable = v; };
    t["aggregation"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "mean") {
        c.aggregation = Aggregation::mean;
      } else if (v == "sum") {
        c.aggregation = Aggregation::sum;
      } else {
        bad(k, v, "expected mean or sum");
      }
    };
    t["min_months"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const auto n = to_int(k, v);
      if (n < 0 || n > 3) bad(k, v, "must be between 0 and 3");
      c.min_months = static_cast<int>(n);
    };
    t["output"] = [](RunConfig& c, const std::string&, const std::string& v) { c.output = v; };
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const auto n = to_int(k, v);
      if (n < 0) bad(k, v, "must be non-negative");
      c.seed = static_cast<std::uint64_t>(n);
    };

    t["model.trend"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.trend = to_bool(k, v); };
    t["model.seasonal"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.spec.seasonal = to_bool(k, v);
    };
    t["model.season_length"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const auto n = to_int(k, v);
      if (n < 2) bad(k, v, "must be at least 2");
      c.spec.season_length = static_cast<int>(n);
    };
    t["model.cycle"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.cycle = to_bool(k, v); };
    t["model.spatial"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.spec.spatial = spatial_mode_from_string(v);
    };
    t["model.covariates"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.spec.covariates = split_list(v);
      for (const auto& name : c.spec.covariates) {
        if (!is_known_covariate(name)) bad(k, name, "unknown covariate");
      }
    };
    t["model.tau_basis"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.tau_basis = split_list(v);
      for (const auto& name : c.tau_basis) {
        if (name != "x" && name != "y" && name != "longitude" && name != "latitude" && name != "altitude") {
          bad(k, name, "unknown basis column");
        }
      }
      c.spec.nonstationary_tau_terms = static_cast<int>(c.tau_basis.size());
    };

    t["mesh.max_edge_inner"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.mesh.max_edge_inner = positive(k, v);
      c.mesh_sizes_given = true;
    };
    t["mesh.max_edge_outer"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.mesh.max_edge_outer = positive(k, v);
      c.mesh_sizes_given = true;
    };
    t["mesh.extension_margin"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.mesh.extension_margin = positive(k, v);
      c.mesh_sizes_given = true;
    };
    t["mesh.min_angle"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const double d = to_double(k, v);
      if (d < 0 || d > 33) bad(k, v, "must lie in [0, 33] degrees");
      c.mesh.min_angle_deg = d;
    };
    t["mesh.buffer"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.mesh.buffer = positive(k, v); };
    t["mesh.inner_fraction"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.mesh_inner_fraction = positive(k, v);
    };
    t["mesh.outer_fraction"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.mesh_outer_fraction = positive(k, v);
    };
    t["mesh.margin_fraction"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.mesh_margin_fraction = positive(k, v);
    };

    t["prior.precision_shape"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.priors.precision_shape = positive(k, v);
    };
    t["prior.precision_rate"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.priors.precision_rate = positive(k, v);
    };
    t["prior.pacf_precision"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.priors.pacf_precision = positive(k, v);
    };
    t["prior.sigma0"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.priors.sigma0 = positive(k, v);
      c.sigma0_given = true;
    };
    t["prior.rho0"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.priors.rho0 = positive(k, v);
      c.rho0_given = true;
    };
    t["prior.spatial_shape"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.priors.spatial_shape = positive(k, v);
    };
    t["prior.theta_tau_precision"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.priors.theta_tau_precision = positive(k, v);
    };

    t["inference.grid_delta"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.inla.grid.delta = positive(k, v);
    };
    t["inference.grid_cutoff"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const double d = to_double(k, v);
      if (d < 0) bad(k, v, "must be non-negative");
      c.inla.grid.cutoff = d;
    };
    t["inference.grid_max_points"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const auto n = to_int(k, v);
      if (n < 1) bad(k, v, "must be positive");
      c.inla.grid.max_points = static_cast<std::size_t>(n);
    };
    t["inference.max_iterations"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const auto n = to_int(k, v);
      if (n < 1) bad(k, v, "must be positive");
      c.inla.optimizer.max_iterations = static_cast<int>(n);
    };
    t["inference.gradient_tolerance"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.inla.optimizer.gradient_tolerance = positive(k, v);
    };
    t["inference.latent_quantiles"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.inla.latent_quantiles = to_bool(k, v);
    };

    auto sim_int = [](int SimulationSettings::*field, int lo) {
      return [field, lo](RunConfig& c, const std::string& k, const std::string& v) {
        const auto n = to_int(k, v);
        if (n < lo) bad(k, v, "too small");
        c.sim.*field = static_cast<int>(n);
      };
    };
    auto sim_double = [](double SimulationSettings::*field) {
      return [field](RunConfig& c, const std::string& k, const std::string& v) { c.sim.*field = to_double(k, v); };
    };
    t["sim.stations"] = sim_int(&SimulationSettings::stations, 3);
    t["sim.periods"] = sim_int(&SimulationSettings::periods, 2);
    t["sim.width"] = sim_double(&SimulationSettings::width);
    t["sim.height"] = sim_double(&SimulationSettings::height);
    t["sim.missing_rate"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const double d = to_double(k, v);
      if (d < 0 || d >= 1) bad(k, v, "must lie in [0, 1)");
      c.sim.missing_rate = d;
    };
    t["sim.log_prec_gauss"] = sim_double(&SimulationSettings::log_prec_gauss);
    t["sim.log_prec_trend"] = sim_double(&SimulationSettings::log_prec_trend);
    t["sim.log_prec_seasonal"] = sim_double(&SimulationSettings::log_prec_seasonal);
    t["sim.log_prec_cycle"] = sim_double(&SimulationSettings::log_prec_cycle);
    t["sim.pacf1"] = sim_double(&SimulationSettings::pacf1);
    t["sim.pacf2"] = sim_double(&SimulationSettings::pacf2);
    t["sim.sigma"] = sim_double(&SimulationSettings::sigma);
    t["sim.range"] = sim_double(&SimulationSettings::range);
    t["sim.intercept"] = sim_double(&SimulationSettings::intercept);
    t["sim.trend_level"] = sim_double(&SimulationSettings::trend_level);
    t["sim.seasonal_amplitude"] = sim_double(&SimulationSettings::seasonal_amplitude);
    t["sim.theta_tau"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.sim.theta_tau = to_doubles(k, v);
    };
    t["sim.beta"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.sim.beta = to_doubles(k, v); };
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(config, key, value);
  config.entries[key] = value;
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (c.entries.count(key)) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    try {
      apply_config_entry(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!c.entries.count("aggregation")) {
    // accumulated quantities default to quarterly totals
    std::string v = c.variable;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char ch) { return std::tolower(ch); });
    for (const char* word : {"rain", "precip"}) {
      if (v.find(word) != std::string::npos) c.aggregation = Aggregation::sum;
    }
  }
  c.spec.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string RunConfig::hash() const {
  std::string canon;
  for (const auto& [k, v] : entries) canon += k + "=" + v + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

}  // namespace stsm
