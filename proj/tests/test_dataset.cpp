#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "stsm/config.hpp"
#include "stsm/errors.hpp"

using namespace stsm;

namespace {

const std::string kHeader = "station_id,lon,lat,altitude,dist_sea_km,year,month,value\n";

Dataset ingest(const std::string& body, Aggregation agg, int min_months = 0) {
  std::istringstream in(kHeader + body);
  IngestOptions o;
  o.aggregation = agg;
  o.min_months = min_months;
  return ingest_csv_stream(in, o);
}

}  // namespace

TEST(Period, IndexRoundTrip) {
  for (int idx : {0, 3, 8000, 8003, 8017}) EXPECT_EQ(Period::from_index(idx).index(), idx);
  EXPECT_EQ((Period{2001, 3}).index(), 4 * 2001 + 2);
}

TEST(Ingest, QuarterlyMeanNeedsTwoMonths) {
  const Dataset d = ingest(
      "A,1,2,10,5,2000,1,3\n"
      "A,1,2,10,5,2000,2,6\n"
      "A,1,2,10,5,2000,3,\n"
      "A,1,2,10,5,2000,4,7\n"
      "A,1,2,10,5,2000,7,1\n"
      "A,1,2,10,5,2000,8,2\n"
      "A,1,2,10,5,2000,9,6\n",
      Aggregation::mean);
  ASSERT_EQ(d.n_periods(), 3u);
  EXPECT_EQ(d.values(0, 0), 4.5);
  EXPECT_TRUE(std::isnan(d.values(0, 1)));
  EXPECT_EQ(d.values(0, 2), 3.0);
  EXPECT_EQ(d.times.front(), (Period{2000, 1}));
  EXPECT_EQ(d.stations[0].altitude, 10.0);
}

TEST(Ingest, QuarterlySumNeedsAllMonths) {
  const std::string body =
      "A,1,2,10,5,2000,1,3\n"
      "A,1,2,10,5,2000,2,6\n"
      "A,1,2,10,5,2000,4,1\n"
      "A,1,2,10,5,2000,5,2\n"
      "A,1,2,10,5,2000,6,4\n";
  const Dataset d = ingest(body, Aggregation::sum);
  EXPECT_TRUE(std::isnan(d.values(0, 0)));
  EXPECT_EQ(d.values(0, 1), 7.0);
  const Dataset relaxed = ingest(body, Aggregation::sum, 2);
  EXPECT_EQ(relaxed.values(0, 0), 9.0);
}

TEST(Ingest, MultipleStationsAndComments) {
  const Dataset d = ingest(
      "# comment line\n"
      "B,0,0,0,1,2001,12,5\n"
      "B,0,0,0,1,2001,11,5\n"
      "A,3,4,1,2,2001,10,1\n"
      "A,3,4,1,2,2001,11,1\n",
      Aggregation::mean);
  ASSERT_EQ(d.n_stations(), 2u);
  EXPECT_EQ(d.n_observed(), 2u);
  d.validate();
}

TEST(Ingest, MalformedInputThrows) {
  EXPECT_THROW(ingest("", Aggregation::mean), DataError);
  EXPECT_THROW(ingest("A,1,2,10,5,2000,13,3\n", Aggregation::mean), DataError);
  EXPECT_THROW(ingest("A,1,2,10,5,2000,1,x\n", Aggregation::mean), DataError);
  EXPECT_THROW(ingest("A,1,2,10,5,2000,1,3\nA,1,2,10,5,2000,1,4\n", Aggregation::mean), DataError);
  EXPECT_THROW(ingest("A,1,2,10,5,2000,1,3\nA,1,9,10,5,2000,2,4\n", Aggregation::mean), DataError);
  std::istringstream no_header("A,1,2,10,5,2000,1,3\n");
  EXPECT_THROW(ingest_csv_stream(no_header, IngestOptions{}), DataError);
  EXPECT_THROW(ingest_csv({}, IngestOptions{}), ConfigError);
  EXPECT_THROW(ingest_csv({"/nonexistent/file.csv"}, IngestOptions{}), ConfigError);
}

TEST(Ingest, WriteThenReadIsIdentity) {
  for (Aggregation agg : {Aggregation::mean, Aggregation::sum}) {
    Dataset d = stsm::testing::small_dataset(5, 9, 4.0, 17);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (Eigen::Index i = 0; i < d.values.size(); ++i) {
      if (!std::isnan(d.values.data()[i])) d.values.data()[i] = u(rng);
    }
    std::ostringstream out;
    write_csv(out, d, agg, "round trip");
    std::istringstream in(out.str());
    IngestOptions o;
    o.aggregation = agg;
    const Dataset r = ingest_csv_stream(in, o);
    ASSERT_EQ(r.n_stations(), d.n_stations());
    ASSERT_EQ(r.n_periods(), d.n_periods());
    for (std::size_t s = 0; s < d.n_stations(); ++s) {
      EXPECT_EQ(r.stations[s].id, d.stations[s].id);
      EXPECT_EQ(r.stations[s].location.x, d.stations[s].location.x);
      EXPECT_EQ(r.stations[s].dist_sea_km, d.stations[s].dist_sea_km);
    }
    for (Eigen::Index i = 0; i < d.values.size(); ++i) {
      const double a = d.values.data()[i], b = r.values.data()[i];
      if (std::isnan(a)) {
        EXPECT_TRUE(std::isnan(b));
      } else {
        EXPECT_EQ(a, b);
      }
    }
    std::ostringstream again;
    write_csv(again, r, agg, "round trip");
    EXPECT_EQ(again.str(), out.str());
  }
}

TEST(Dataset, CovariatesByName) {
  const Dataset d = stsm::testing::small_dataset(3, 4, 4.0, 1);
  EXPECT_EQ(d.covariate(2, "altitude"), 200.0);
  EXPECT_EQ(d.covariate(1, "dist_sea"), 11.0);
  EXPECT_EQ(d.covariate(0, "longitude"), d.stations[0].location.x);
  EXPECT_EQ(d.covariate(0, "latitude"), d.stations[0].location.y);
  EXPECT_THROW(d.covariate(0, "humidity"), ConfigError);
  EXPECT_TRUE(is_known_covariate("altitude"));
  EXPECT_FALSE(is_known_covariate("humidity"));
}

TEST(Dataset, ValidateRejectsGapsAndShape) {
  Dataset d = stsm::testing::small_dataset(2, 4, 4.0, 1);
  d.times[2] = Period::from_index(d.times[2].index() + 1);
  EXPECT_THROW(d.validate(), DataError);
  d = stsm::testing::small_dataset(2, 4, 4.0, 1);
  d.values.conservativeResize(2, 3);
  EXPECT_THROW(d.validate(), DataError);
}

TEST(Config, ParsesKeysAndRejectsUnknownOrDuplicate) {
  std::istringstream ok("# comment\nmodel.trend = true\nmodel.cycle = false\nseed = 7\n");
  const RunConfig c = parse_config(ok);
  EXPECT_TRUE(c.spec.trend);
  EXPECT_FALSE(c.spec.cycle);
  EXPECT_EQ(c.seed, 7u);
  std::istringstream unknown("model.trend = true\ncolour = blue\n");
  EXPECT_THROW(parse_config(unknown), ConfigError);
  std::istringstream dup("seed = 1\nseed = 2\n");
  EXPECT_THROW(parse_config(dup), ConfigError);
  std::istringstream bad_value("seed = many\n");
  EXPECT_THROW(parse_config(bad_value), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST(Config, AccumulatedVariablesDefaultToSums) {
  std::istringstream rain("variable = rainfall\n");
  EXPECT_EQ(parse_config(rain).aggregation, Aggregation::sum);
  std::istringstream precip("variable = Precipitation\n");
  EXPECT_EQ(parse_config(precip).aggregation, Aggregation::sum);
  std::istringstream temp("variable = temperature\n");
  EXPECT_EQ(parse_config(temp).aggregation, Aggregation::mean);
  std::istringstream forced("variable = rainfall\naggregation = mean\n");
  EXPECT_EQ(parse_config(forced).aggregation, Aggregation::mean);
}

TEST(Config, HashDependsOnEntriesOnly) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  std::istringstream a("seed = 3\nmodel.trend = true\n");
  std::istringstream b("model.trend = true\n\n# reordered\nseed = 3\n");
  std::istringstream c("seed = 4\nmodel.trend = true\n");
  const RunConfig ca = parse_config(a), cb = parse_config(b), cc = parse_config(c);
  EXPECT_EQ(ca.hash(), cb.hash());
  EXPECT_NE(ca.hash(), cc.hash());
  EXPECT_EQ(ca.hash().size(), 16u);
}

TEST(Config, OverridesApplyOnTop) {
  RunConfig c;
  apply_config_entry(c, "sim.stations", "12");
  apply_config_entry(c, "sim.missing_rate", "0.1");
  EXPECT_EQ(c.sim.stations, 12);
  EXPECT_EQ(c.sim.missing_rate, 0.1);
  EXPECT_THROW(apply_config_entry(c, "sim.missing_rate", "1.5"), ConfigError);
  EXPECT_THROW(apply_config_entry(c, "no.such.key", "1"), ConfigError);
  EXPECT_FALSE(config_keys().empty());
}
