#include "stsm/temporal.hpp"

#include <cmath>
#include <numbers>

#include "stsm/errors.hpp"

namespace stsm {

namespace {

// B'B for a banded difference operator given as row offsets/coefficients.
SparseMatrix gram_of_rows(int periods, int first_row_end, int width,
                          const std::vector<double>& coeffs) {
  std::vector<Eigen::Triplet<double>> trips;
  for (int t = first_row_end; t < periods; ++t) {
    for (int a = 0; a < width; ++a) {
      for (int b = 0; b < width; ++b) {
        trips.emplace_back(t - a, t - b, coeffs[a] * coeffs[b]);
      }
    }
  }
  SparseMatrix q(periods, periods);
  q.setFromTriplets(trips.begin(), trips.end());
  return q;
}

}  // namespace

SparseMatrix rw1_structure(int periods) {
  if (periods < 2) throw InvalidArgument("rw1: need at least 2 periods");
  return gram_of_rows(periods, 1, 2, {1.0, -1.0});
}

SparsePrecision rw1_precision(const TrendSpec& spec) {
  if (!(spec.precision > 0)) throw InvalidArgument("rw1: precision must be positive");
  return spec.precision * rw1_structure(spec.periods);
}

SparseMatrix seasonal_structure(int periods, int season_length) {
  if (season_length < 2) throw InvalidArgument("seasonal: season length must be >= 2");
  if (periods < season_length) throw InvalidArgument("seasonal: need periods >= season length");
  return gram_of_rows(periods, season_length - 1, season_length,
                      std::vector<double>(static_cast<std::size_t>(season_length), 1.0));
}

SparsePrecision seasonal_precision(const SeasonalSpec& spec) {
  if (!(spec.precision > 0)) throw InvalidArgument("seasonal: precision must be positive");
  return spec.precision * seasonal_structure(spec.periods, spec.season_length);
}

Ar2Coefficients ar2_from_pacf(double pacf1, double pacf2) {
  if (!(std::abs(pacf1) < 1) || !(std::abs(pacf2) < 1)) {
    throw InvalidArgument("ar2_from_pacf: partial autocorrelations must lie in (-1, 1)");
  }
  return {pacf1 * (1.0 - pacf2), pacf2};
}

std::pair<double, double> pacf_from_ar2(const Ar2Coefficients& ar) {
  if (!is_stationary(ar)) throw InvalidArgument("pacf_from_ar2: non-stationary coefficients");
  return {ar.phi1 / (1.0 - ar.phi2), ar.phi2};
}

bool is_stationary(const Ar2Coefficients& ar) {
  return ar.phi2 > -1.0 && ar.phi1 + ar.phi2 < 1.0 && ar.phi2 - ar.phi1 < 1.0;
}

std::optional<double> cycle_period(const Ar2Coefficients& ar) {
  if (!is_stationary(ar)) throw InvalidArgument("cycle_period: non-stationary AR(2)");
  if (ar.phi1 * ar.phi1 + 4.0 * ar.phi2 >= 0.0) return std::nullopt;
  const double c = ar.phi1 / (2.0 * std::sqrt(-ar.phi2));
  return 2.0 * std::numbers::pi / std::acos(c);
}

Vector ar2_autocovariance(const Ar2Coefficients& ar, int lags) {
  if (!is_stationary(ar)) throw InvalidArgument("ar2_autocovariance: non-stationary AR(2)");
  Vector g(std::max(lags, 1) + 1);
  const double p1 = ar.phi1, p2 = ar.phi2;
  g[0] = (1.0 - p2) / ((1.0 + p2) * ((1.0 - p2) * (1.0 - p2) - p1 * p1));
  g[1] = g[0] * p1 / (1.0 - p2);
  for (Eigen::Index k = 2; k < g.size(); ++k) g[k] = p1 * g[k - 1] + p2 * g[k - 2];
  return g.head(lags + 1);
}

SparsePrecision ar2_precision(const CycleSpec& spec) {
  if (spec.periods < 1) throw InvalidArgument("ar2_precision: need at least one period");
  if (!(spec.precision > 0)) throw InvalidArgument("ar2_precision: precision must be positive");
  const Ar2Coefficients ar = ar2_from_pacf(spec.pacf1, spec.pacf2);
  const int n = spec.periods;
  const Vector g = ar2_autocovariance(ar, 1) / spec.precision;
  std::vector<Eigen::Triplet<double>> trips;
  if (n == 1) {
    trips.emplace_back(0, 0, 1.0 / g[0]);
  } else {
    // stationary start for (c_1, c_2)
    const double det = g[0] * g[0] - g[1] * g[1];
    trips.emplace_back(0, 0, g[0] / det);
    trips.emplace_back(1, 1, g[0] / det);
    trips.emplace_back(0, 1, -g[1] / det);
    trips.emplace_back(1, 0, -g[1] / det);
    const double coeffs[3] = {1.0, -ar.phi1, -ar.phi2};
    for (int t = 2; t < n; ++t) {
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          trips.emplace_back(t - a, t - b, spec.precision * coeffs[a] * coeffs[b]);
        }
      }
    }
  }
  SparseMatrix q(n, n);
  q.setFromTriplets(trips.begin(), trips.end());
  return q;
}

double ar2_log_determinant(const CycleSpec& spec) {
  const Ar2Coefficients ar = ar2_from_pacf(spec.pacf1, spec.pacf2);
  const Vector g = ar2_autocovariance(ar, 1) / spec.precision;
  if (spec.periods == 1) return -std::log(g[0]);
  return -std::log(g[0] * g[0] - g[1] * g[1]) + (spec.periods - 2) * std::log(spec.precision);
}

double pacf_from_internal(double z) { return std::tanh(0.5 * z); }

double internal_from_pacf(double p) {
  if (!(std::abs(p) < 1)) throw InvalidArgument("internal_from_pacf: |p| must be < 1");
  return std::log((1.0 + p) / (1.0 - p));
}

}  // namespace stsm
