#pragma once

#include <optional>

#include "stsm/sparse.hpp"

namespace stsm {

struct TrendSpec {
  int periods = 2;
  double precision = 1.0;  // 1 / Var(innovation)
};

struct SeasonalSpec {
  int periods = 4;
  int season_length = 4;
  double precision = 1.0;
};

struct CycleSpec {
  int periods = 2;
  double pacf1 = 0.0;
  double pacf2 = 0.0;
  double precision = 1.0;
};

struct Ar2Coefficients {
  double phi1 = 0.0;
  double phi2 = 0.0;
};

/// Intrinsic first-order random walk, rank periods - 1.
SparsePrecision rw1_precision(const TrendSpec& spec);
/// Structure matrix at unit precision.
SparseMatrix rw1_structure(int periods);

/// Dummy seasonal: precision * sum_t (s_t + ... + s_{t-m+1})^2, rank deficiency m - 1.
SparsePrecision seasonal_precision(const SeasonalSpec& spec);
SparseMatrix seasonal_structure(int periods, int season_length);

/// Durbin-Levinson map for order two: phi2 = pacf2, phi1 = pacf1 (1 - pacf2).
Ar2Coefficients ar2_from_pacf(double pacf1, double pacf2);
/// Inverse of ar2_from_pacf on the stationarity triangle.
std::pair<double, double> pacf_from_ar2(const Ar2Coefficients& ar);

bool is_stationary(const Ar2Coefficients& ar);

/// Period 2 pi / arccos(phi1 / (2 sqrt(-phi2))) when the characteristic roots
/// are complex, nullopt otherwise. Throws on non-stationary input.
std::optional<double> cycle_period(const Ar2Coefficients& ar);

/// Exact stationary AR(2) precision with innovation precision spec.precision.
SparsePrecision ar2_precision(const CycleSpec& spec);

/// Stationary autocovariances gamma_0..gamma_{lags} for unit innovation variance.
Vector ar2_autocovariance(const Ar2Coefficients& ar, int lags);

/// log det of ar2_precision in closed form.
double ar2_log_determinant(const CycleSpec& spec);

/// p = (e^z - 1) / (e^z + 1) and its inverse.
double pacf_from_internal(double z);
double internal_from_pacf(double p);

}  // namespace stsm
