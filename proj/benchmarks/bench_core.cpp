#include <benchmark/benchmark.h>

#include <sstream>

#include "stsm/inference.hpp"
#include "stsm/run.hpp"
#include "stsm/simulate.hpp"
#include "stsm/spde.hpp"
#include "stsm/temporal.hpp"

using namespace stsm;

namespace {

std::vector<Point2D> station_points(int n) {
  std::vector<Point2D> p;
  for (const auto& s : random_stations(n, 10.0, 10.0, 1)) p.push_back(s.location);
  return p;
}

TriangulatedMesh bench_mesh(int n) {
  MeshOptions o;
  o.max_edge_inner = 0.8;
  o.max_edge_outer = 2.0;
  o.extension_margin = 2.0;
  return build_mesh(station_points(n), o);
}

RunConfig sim_config() {
  std::istringstream in("seed = 3\nmodel.spatial = constant\nsim.stations = 50\nsim.periods = 60\n");
  return parse_config(in);
}

}  // namespace

static void BM_BuildMesh(benchmark::State& state) {
  const auto pts = station_points(static_cast<int>(state.range(0)));
  MeshOptions o;
  o.max_edge_inner = 0.8;
  o.max_edge_outer = 2.0;
  o.extension_margin = 2.0;
  for (auto _ : state) benchmark::DoNotOptimize(build_mesh(pts, o));
}
BENCHMARK(BM_BuildMesh)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_MaternPrecision(benchmark::State& state) {
  const FemMatrices fem = assemble_fem(bench_mesh(static_cast<int>(state.range(0))));
  MaternParams p;
  p.log_tau = -1.0;
  p.log_kappa = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(matern_precision(fem, p));
  state.counters["vertices"] = static_cast<double>(fem.c.rows());
}
BENCHMARK(BM_MaternPrecision)->Arg(50)->Arg(200)->Unit(benchmark::kMicrosecond);

static void BM_CholeskyAndSelectedInverse(benchmark::State& state) {
  const FemMatrices fem = assemble_fem(bench_mesh(static_cast<int>(state.range(0))));
  MaternParams p;
  p.log_tau = -1.0;
  p.log_kappa = 0.0;
  const SparsePrecision q = matern_precision(fem, p);
  const auto ordering = SparseCholesky::ordering_for(q);
  for (auto _ : state) {
    SparseCholesky chol;
    chol.factorize(q, ordering);
    benchmark::DoNotOptimize(chol.inverse_diagonal());
  }
}
BENCHMARK(BM_CholeskyAndSelectedInverse)->Arg(50)->Arg(200)->Unit(benchmark::kMicrosecond);

static void BM_PacfToAr(benchmark::State& state) {
  double p = 0.2891;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cycle_period(ar2_from_pacf(p, -0.046)));
    p = p < 0.9 ? p + 1e-9 : 0.2891;
  }
}
BENCHMARK(BM_PacfToAr);

static void BM_LogPosterior(benchmark::State& state) {
  const RunConfig config = sim_config();
  const SimulationResult sim = run_simulation(config);
  const auto model = prepare_model(config, sim.data);
  const ThetaPosterior post(model->gmrf, model->priors);
  const Vector theta = HyperLayout(config.spec).pack(sim.truth.hyper);
  for (auto _ : state) benchmark::DoNotOptimize(post(theta));
  state.counters["latent"] = static_cast<double>(model->gmrf.layout.size);
}
BENCHMARK(BM_LogPosterior)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
