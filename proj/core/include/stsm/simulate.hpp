#pragma once

#include <cstdint>
#include <vector>

#include "stsm/dataset.hpp"
#include "stsm/mesh.hpp"
#include "stsm/model.hpp"
#include "stsm/spde.hpp"

namespace stsm {

/// Draw from N(0, Q^{-1}). Throws InvalidArgument when Q is not positive
/// definite (intrinsic blocks need sample_intrinsic instead).
Vector sample_gmrf(const SparsePrecision& precision, std::uint64_t seed);

/// Draw from the intrinsic prior N(0, Q^+) restricted to {x : C x = 0}, where
/// Q^+ is the pseudo-inverse. Dense; meant for temporal blocks.
Vector sample_intrinsic(const Matrix& precision, const Matrix& constraints, std::uint64_t seed);

struct SimulationConfig {
  ModelSpec spec;
  HyperParams truth;     // internal scale
  Vector beta;           // one entry per covariate
  double intercept = 0.0;
  double trend_level = 0.0;
  /// Amplitude of a deterministic zero-sum seasonal pattern added to the
  /// stochastic seasonal draw (the part its prior leaves unconstrained).
  double seasonal_amplitude = 0.0;
  std::vector<Station> stations;
  int periods = 40;
  Period start{2000, 1};
  double missing_rate = 0.0;
  std::uint64_t seed = 1;
  Matrix tau_basis;      // n_vertices x nonstationary terms
};

struct SimulationTruth {
  Vector latent;   // layout order of make_latent_layout
  Vector trend;    // per period (level included); intercept replicated when trend is off
  Vector seasonal;
  Vector cycle;
  Matrix spatial;  // n_vertices x (1 or periods)
  Vector beta;
  Matrix signal;   // stations x periods, noiseless linear predictor
  HyperParams hyper;
};

struct SimulationResult {
  Dataset data;
  SimulationTruth truth;
};

/// Stations uniformly in [0, width] x [0, height] with altitude in [0, 1000]
/// and distance to the sea in [0, 300].
std::vector<Station> random_stations(int n, double width, double height, std::uint64_t seed);

SimulationResult simulate_dataset(const SimulationConfig& config, const TriangulatedMesh& mesh);

}  // namespace stsm
