#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "stsm/dataset.hpp"
#include "stsm/inference.hpp"
#include "stsm/mesh.hpp"
#include "stsm/model.hpp"

namespace stsm {

/// Settings for the `simulate` subcommand (keys prefixed `sim.`).
struct SimulationSettings {
  int stations = 50;
  double width = 10.0;
  double height = 10.0;
  int periods = 60;
  double missing_rate = 0.3;
  double log_prec_gauss = 2.0;
  double log_prec_trend = 3.0;
  double log_prec_seasonal = 4.0;
  double log_prec_cycle = 2.0;
  double pacf1 = 0.5;
  double pacf2 = -0.3;
  double sigma = 1.0;  // spatial field sd
  double range = 3.0;  // spatial practical range
  std::vector<double> theta_tau;
  std::vector<double> beta;
  double intercept = 0.0;
  double trend_level = 20.0;
  double seasonal_amplitude = 2.0;
};

/// Flat `key = value` configuration shared by every subcommand. Unknown keys
/// are rejected with ConfigError.
struct RunConfig {
  std::vector<std::string> inputs;
  std::string variable = "value";
  Aggregation aggregation = Aggregation::mean;
  int min_months = 0;
  std::string output = "run";
  std::uint64_t seed = 1;

  ModelSpec spec;
  std::vector<std::string> tau_basis;  // non-stationary log tau columns

  MeshOptions mesh;
  /// Mesh sizes relative to the station bounding-box diagonal, used when the
  /// absolute sizes are not given.
  double mesh_inner_fraction = 0.08;
  double mesh_outer_fraction = 0.2;
  double mesh_margin_fraction = 0.2;
  bool mesh_sizes_given = false;

  PriorOptions priors;
  bool sigma0_given = false;
  bool rho0_given = false;
  InlaOptions inla;

  SimulationSettings sim;

  /// Canonical `key = value` lines of every explicitly set key, sorted.
  std::map<std::string, std::string> entries;

  /// FNV-1a 64-bit hash of the canonical entries, as 16 hex digits.
  std::string hash() const;
};

RunConfig parse_config(std::istream& in, const std::string& source = "config");
RunConfig load_config(const std::string& path);
/// Parses `key = value` overrides on top of an existing configuration.
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);

/// Names of every accepted key, for documentation and error messages.
const std::vector<std::string>& config_keys();

std::uint64_t fnv1a64(const std::string& text);

}  // namespace stsm
