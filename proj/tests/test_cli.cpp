#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "stsm_cli_test.log";
  const std::string cmd = std::string(STSM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

class CliLoop : public ::testing::Test {
 protected:
  static fs::path dir;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / "stsm_cli_loop";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file(dir / "run.cfg",
               "input = " + (dir / "train.csv").string() +
                   "\n"
                   "variable = temperature\n"
                   "seed = 5\n"
                   "model.cycle = false\n"
                   "model.spatial = constant\n"
                   "sim.stations = 15\n"
                   "sim.periods = 24\n"
                   "sim.missing_rate = 0.2\n"
                   "inference.latent_quantiles = false\n");
  }

  static std::string cfg() { return (dir / "run.cfg").string(); }
};

fs::path CliLoop::dir;

}  // namespace

TEST(Cli, UsageErrorsExitWithConfigCode) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("fit").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, MissingOrBadConfigExitsWithConfigCode) {
  EXPECT_EQ(run("fit --config /nonexistent/run.cfg").code, 2);
  const fs::path p = fs::temp_directory_path() / "stsm_bad.cfg";
  write_file(p, "no_such_key = 1\n");
  const Result r = run("fit --config " + p.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("no_such_key"), std::string::npos);
}

TEST(Cli, MalformedDataExitsWithDataCode) {
  const fs::path data = fs::temp_directory_path() / "stsm_bad.csv";
  write_file(data, "station_id,lon,lat,altitude,dist_sea_km,year,month,value\nA,0,0,0,0,2000,14,1\n");
  const fs::path cfg = fs::temp_directory_path() / "stsm_bad_data.cfg";
  write_file(cfg, "input = " + data.string() + "\noutput = " + (fs::temp_directory_path() / "stsm_bad_run").string() + "\n");
  EXPECT_EQ(run("fit --config " + cfg.string()).code, 3);
}

TEST_F(CliLoop, SimulateFitForecastMetrics) {
  const std::string train = (dir / "train.csv").string();
  const std::string hold = (dir / "holdout.csv").string();
  Result r = run("simulate --config " + cfg() + " --out " + train + " --holdout 4 --holdout-out " + hold +
                 " --truth " + (dir / "truth.csv").string());
  ASSERT_EQ(r.code, 0) << r.out;
  ASSERT_TRUE(fs::exists(train));
  ASSERT_TRUE(fs::exists(hold));

  r = run("fit --config " + cfg() + " --output " + (dir / "run_a").string());
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"hyperparameters.csv", "components.csv", "spatial.csv", "mesh.txt", "stations.csv",
                        "summary.txt", "config.txt"}) {
    EXPECT_TRUE(fs::exists(dir / "run_a" / f)) << f;
  }

  const std::string fc = (dir / "forecast.csv").string();
  r = run("forecast --run " + (dir / "run_a").string() + " --horizon 4 --out " + fc);
  ASSERT_EQ(r.code, 0) << r.out;

  const std::string met = (dir / "metrics.txt").string();
  r = run("metrics --run " + (dir / "run_a").string() + " --observed " + hold + " --forecast " + fc +
          " --out " + met);
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream lines(slurp(met));
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("# ", 0), 0u);
  std::getline(lines, line);
  EXPECT_EQ(line, "horizon ME RMSE MAE MPE MAPE ACF1 TheilsU");
  int rows = 0;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    int h = 0;
    fields >> h;
    EXPECT_EQ(h, rows + 1);
    for (int k = 0; k < 7; ++k) {
      std::string v;
      fields >> v;
      // ACF1 needs two errors per horizon; the rest must be finite
      if (k == 5 && v == "NA") continue;
      EXPECT_TRUE(std::isfinite(std::stod(v))) << line;
    }
    ++rows;
  }
  EXPECT_EQ(rows, 4);

  const std::string surf = (dir / "surface.asc").string();
  r = run("predict-grid --run " + (dir / "run_a").string() + " --period 3 --nx 8 --ny 6 --out " + surf +
          " --sd-out " + (dir / "surface_sd.asc").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(surf).rfind("ncols 8 nrows 6", 0), 0u);
  EXPECT_EQ(run("predict-grid --run " + (dir / "run_a").string() + " --period 999 --out " + surf).code, 2);
}

TEST_F(CliLoop, RerunIsByteIdentical) {
  const std::string train = (dir / "train.csv").string();
  ASSERT_EQ(run("simulate --config " + cfg() + " --out " + train).code, 0);
  const std::string first = slurp(train);
  ASSERT_EQ(run("simulate --config " + cfg() + " --out " + train).code, 0);
  EXPECT_EQ(slurp(train), first);

  ASSERT_EQ(run("fit --config " + cfg() + " --output " + (dir / "run_b").string()).code, 0);
  ASSERT_EQ(run("fit --config " + cfg() + " --output " + (dir / "run_c").string()).code, 0);
  int compared = 0;
  for (const auto& e : fs::directory_iterator(dir / "run_b")) {
    const fs::path other = dir / "run_c" / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path().filename();
    ++compared;
  }
  EXPECT_GT(compared, 5);
}

TEST_F(CliLoop, MeshInfoReportsStatistics) {
  ASSERT_EQ(run("simulate --config " + cfg() + " --out " + (dir / "train.csv").string()).code, 0);
  const Result r = run("mesh-info --config " + cfg() + " --out " + (dir / "mesh.txt").string());
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* key : {"vertices ", "inner_vertices ", "triangles ", "min_angle_deg ", "max_edge "}) {
    EXPECT_NE(r.out.find(key), std::string::npos) << key;
  }
  const std::string mesh = slurp(dir / "mesh.txt");
  EXPECT_NE(mesh.find("vertices "), std::string::npos);
  EXPECT_EQ(run("mesh-info").code, 2);
}
