#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "stsm/mesh.hpp"
#include "stsm/sparse.hpp"

namespace stsm {

struct Station {
  std::string id;
  Point2D location;  // (lon, lat)
  double altitude = 0.0;     // meters
  double dist_sea_km = 0.0;  // precomputed distance to the coast
};

/// Quarterly period label.
struct Period {
  int year = 0;
  int quarter = 1;  // 1..4

  int index() const { return 4 * year + (quarter - 1); }
  static Period from_index(int idx);
  friend bool operator==(const Period&, const Period&) = default;
};

/// Station registry, contiguous quarterly axis and a stations x periods
/// table in which NaN marks a missing observation.
struct Dataset {
  std::string variable = "value";
  std::string units;
  std::vector<Station> stations;
  std::vector<Period> times;
  Matrix values;

  std::size_t n_stations() const { return stations.size(); }
  std::size_t n_periods() const { return times.size(); }
  std::size_t n_observed() const;
  std::vector<Point2D> locations() const;

  /// Static covariate by name: altitude, latitude, longitude, dist_sea.
  /// Throws ConfigError for an unknown name.
  double covariate(std::size_t station, const std::string& name) const;

  /// Checks contiguity of times and table shape; throws DataError.
  void validate() const;
};

bool is_known_covariate(const std::string& name);

enum class Aggregation { mean, sum };

struct IngestOptions {
  Aggregation aggregation = Aggregation::mean;
  /// Months required for a quarterly aggregate. Non-positive selects the
  /// default: 2 for mean, 3 for sum.
  int min_months = 0;
  std::string variable = "value";
};

struct IngestReport {
  std::vector<Period> times;
  std::vector<double> observed_fraction;  // per period
  std::size_t rows = 0;
};

/// Reads monthly station CSV files with header
/// `station_id,lon,lat,altitude,dist_sea_km,year,month,value`; empty value
/// cells are missing and lines starting with '#' are skipped.
Dataset ingest_csv(const std::vector<std::string>& paths, const IngestOptions& options,
                   IngestReport* report = nullptr);
Dataset ingest_csv_stream(std::istream& in, const IngestOptions& options,
                          IngestReport* report = nullptr);

/// Writes the dataset back as monthly rows whose aggregation under
/// `aggregation` reproduces every quarterly value bit for bit.
void write_csv(std::ostream& out, const Dataset& data, Aggregation aggregation,
               const std::string& comment = {});

extern const char* const kCsvHeader;

}  // namespace stsm
