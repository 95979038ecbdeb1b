#include "stsm/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string_view>
#include <unordered_map>

#include "stsm/errors.hpp"

namespace stsm {

const char* const kCsvHeader = "station_id,lon,lat,altitude,dist_sea_km,year,month,value";

Period Period::from_index(int idx) {
  const int year = idx >= 0 ? idx / 4 : -((-idx + 3) / 4);
  return {year, idx - 4 * year + 1};
}

std::size_t Dataset::n_observed() const {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) n += std::isnan(values.data()[i]) ? 0 : 1;
  return n;
}

std::vector<Point2D> Dataset::locations() const {
  std::vector<Point2D> out;
  out.reserve(stations.size());
  for (const auto& s : stations) out.push_back(s.location);
  return out;
}

bool is_known_covariate(const std::string& name) {
  return name == "altitude" || name == "latitude" || name == "longitude" || name == "dist_sea";
}

double Dataset::covariate(std::size_t station, const std::string& name) const {
  const Station& s = stations.at(station);
  if (name == "altitude") return s.altitude;
  if (name == "latitude") return s.location.y;
  if (name == "longitude") return s.location.x;
  if (name == "dist_sea") return s.dist_sea_km;
  throw ConfigError("unknown covariate '" + name + "'");
}

void Dataset::validate() const {
  if (values.rows() != static_cast<Eigen::Index>(stations.size()) ||
      values.cols() != static_cast<Eigen::Index>(times.size())) {
    throw DataError("dataset: value table shape does not match stations x periods");
  }
  for (std::size_t t = 1; t < times.size(); ++t) {
    if (times[t].index() != times[t - 1].index() + 1) {
      throw DataError("dataset: periods are not contiguous at position " + std::to_string(t));
    }
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct MonthKey {
  std::size_t station;
  int year;
  int month;
  bool operator<(const MonthKey& o) const {
    if (station != o.station) return station < o.station;
    if (year != o.year) return year < o.year;
    return month < o.month;
  }
};

struct Accumulator {
  std::vector<Station> stations;
  std::unordered_map<std::string, std::size_t> by_id;
  std::map<MonthKey, double> months;  // NaN = explicitly missing
  int min_q = std::numeric_limits<int>::max();
  int max_q = std::numeric_limits<int>::min();
  std::size_t rows = 0;
};

void read_stream(std::istream& in, const std::string& source, Accumulator& acc) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  const std::string where = source.empty() ? std::string() : source + ":";
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto fail = [&](const std::string& what) {
      throw DataError(where + std::to_string(line_no) + ": " + what);
    };
    if (!header_seen) {
      if (view != kCsvHeader) fail(std::string("expected header '") + kCsvHeader + "'");
      header_seen = true;
      continue;
    }
    const auto f = split(view);
    if (f.size() != 8) fail("expected 8 fields, found " + std::to_string(f.size()));
    Station s;
    s.id = std::string(f[0]);
    if (s.id.empty()) fail("empty station_id");
    if (!parse_number(f[1], s.location.x) || !parse_number(f[2], s.location.y) ||
        !parse_number(f[3], s.altitude) || !parse_number(f[4], s.dist_sea_km)) {
      fail("malformed station attributes");
    }
    if (!std::isfinite(s.location.x) || !std::isfinite(s.location.y) ||
        !std::isfinite(s.altitude) || !std::isfinite(s.dist_sea_km)) {
      fail("non-finite station attributes");
    }
    int year = 0, month = 0;
    if (!parse_number(f[5], year) || !parse_number(f[6], month) || month < 1 || month > 12) {
      fail("malformed year/month");
    }
    double value = std::numeric_limits<double>::quiet_NaN();
    if (!f[7].empty() && (!parse_number(f[7], value) || !std::isfinite(value))) {
      fail("malformed value '" + std::string(f[7]) + "'");
    }
    auto [it, inserted] = acc.by_id.try_emplace(s.id, acc.stations.size());
    if (inserted) {
      acc.stations.push_back(s);
    } else {
      const Station& known = acc.stations[it->second];
      if (!(known.location == s.location) || known.altitude != s.altitude ||
          known.dist_sea_km != s.dist_sea_km) {
        fail("station '" + s.id + "' has inconsistent coordinates or attributes");
      }
    }
    const MonthKey key{it->second, year, month};
    if (!acc.months.emplace(key, value).second) {
      fail("duplicate row for station '" + s.id + "' " + std::to_string(year) + "-" +
           std::to_string(month));
    }
    const int q = Period{year, (month - 1) / 3 + 1}.index();
    acc.min_q = std::min(acc.min_q, q);
    acc.max_q = std::max(acc.max_q, q);
    ++acc.rows;
  }
  if (!header_seen) throw DataError(where + " missing CSV header");
}

Dataset finish(Accumulator& acc, const IngestOptions& options, IngestReport* report) {
  if (acc.stations.empty()) throw DataError("ingest: no data rows");
  const int required = options.min_months > 0
                           ? options.min_months
                           : (options.aggregation == Aggregation::sum ? 3 : 2);
  if (required > 3) throw ConfigError("ingest: min_months must be at most 3");
  Dataset data;
  data.variable = options.variable;
  data.stations = acc.stations;
  for (int q = acc.min_q; q <= acc.max_q; ++q) data.times.push_back(Period::from_index(q));
  const auto n_t = static_cast<Eigen::Index>(data.times.size());
  data.values = Matrix::Constant(static_cast<Eigen::Index>(data.stations.size()), n_t,
                                 std::numeric_limits<double>::quiet_NaN());
  for (std::size_t s = 0; s < data.stations.size(); ++s) {
    for (Eigen::Index t = 0; t < n_t; ++t) {
      const Period p = data.times[static_cast<std::size_t>(t)];
      double present[3];
      int count = 0;
      for (int m = 0; m < 3; ++m) {
        const auto it = acc.months.find({s, p.year, 3 * (p.quarter - 1) + m + 1});
        if (it != acc.months.end() && !std::isnan(it->second)) present[count++] = it->second;
      }
      if (count < required || count == 0) continue;
      double v;
      if (options.aggregation == Aggregation::sum) {
        v = present[0];
        for (int k = 1; k < count; ++k) v += present[k];
      } else {
        // anchored mean: identical months reproduce their value exactly
        double dev = 0.0;
        for (int k = 1; k < count; ++k) dev += present[k] - present[0];
        v = present[0] + dev / count;
      }
      data.values(static_cast<Eigen::Index>(s), t) = v;
    }
  }
  if (report) {
    report->times = data.times;
    report->rows = acc.rows;
    report->observed_fraction.assign(data.times.size(), 0.0);
    for (Eigen::Index t = 0; t < n_t; ++t) {
      std::size_t k = 0;
      for (Eigen::Index s = 0; s < data.values.rows(); ++s) k += std::isnan(data.values(s, t)) ? 0 : 1;
      report->observed_fraction[static_cast<std::size_t>(t)] =
          static_cast<double>(k) / static_cast<double>(data.stations.size());
    }
  }
  return data;
}

}  // namespace

Dataset ingest_csv_stream(std::istream& in, const IngestOptions& options, IngestReport* report) {
  Accumulator acc;
  read_stream(in, "", acc);
  return finish(acc, options, report);
}

Dataset ingest_csv(const std::vector<std::string>& paths, const IngestOptions& options,
                   IngestReport* report) {
  if (paths.empty()) throw ConfigError("ingest: no input files");
  Accumulator acc;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw ConfigError("ingest: cannot open '" + path + "'");
    read_stream(in, path, acc);
  }
  return finish(acc, options, report);
}

void write_csv(std::ostream& out, const Dataset& data, Aggregation aggregation,
               const std::string& comment) {
  data.validate();
  if (!comment.empty()) out << "# " << comment << '\n';
  out << kCsvHeader << '\n';
  for (std::size_t s = 0; s < data.stations.size(); ++s) {
    const Station& st = data.stations[s];
    const std::string prefix = st.id + "," + format_double(st.location.x) + "," +
                               format_double(st.location.y) + "," + format_double(st.altitude) +
                               "," + format_double(st.dist_sea_km) + ",";
    for (std::size_t t = 0; t < data.times.size(); ++t) {
      const Period p = data.times[t];
      const double v = data.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
      double monthly[3] = {v, v, v};
      if (aggregation == Aggregation::sum) {
        const double third = v / 3.0;
        monthly[0] = third;
        monthly[1] = third;
        monthly[2] = v - 2.0 * third;
      }
      for (int m = 0; m < 3; ++m) {
        out << prefix << p.year << ',' << 3 * (p.quarter - 1) + m + 1 << ',';
        if (!std::isnan(v)) out << format_double(monthly[m]);
        out << '\n';
      }
    }
  }
}

}  // namespace stsm
