#include "stsm/predict.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "stsm/errors.hpp"
#include "stsm/temporal.hpp"

namespace stsm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double hyper_mean(const InlaResult& r, HyperKind kind, const HyperLayout& layout, double fallback) {
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout.kind(i) == kind) return r.hyper[i].user.mean;
  }
  return fallback;
}

struct SpatialTerm {
  double mean = 0.0;
  double var = 0.0;
};

// Field value at a point as the barycentric combination of vertex summaries.
SpatialTerm spatial_at(const FittedModel& m, const BarycentricHit& hit, int period) {
  SpatialTerm s;
  if (!m.layout.spatial) return s;
  const auto nv = static_cast<Eigen::Index>(m.mesh.n_vertices());
  const auto& tri = m.mesh.triangles[hit.triangle];
  for (int k = 0; k < 3; ++k) {
    const double w = hit.weights[static_cast<std::size_t>(k)];
    if (w == 0.0) continue;
    const Eigen::Index v = tri[static_cast<std::size_t>(k)];
    if (m.spec.spatial == SpatialMode::replicates && period < 0) {
      // forecasts: replicate average over the fitted periods
      double mean = 0.0, var = 0.0;
      for (int t = 0; t < m.periods(); ++t) {
        const Eigen::Index idx = m.layout.spatial->offset + t * nv + v;
        mean += m.latent_mean[idx];
        var += m.latent_sd[idx] * m.latent_sd[idx];
      }
      const double n = m.periods();
      s.mean += w * mean / n;
      s.var += w * w * var / (n * n);
    } else {
      Eigen::Index idx = m.layout.spatial->offset + v;
      if (m.spec.spatial == SpatialMode::replicates) idx += static_cast<Eigen::Index>(period) * nv;
      s.mean += w * m.latent_mean[idx];
      s.var += w * w * m.latent_sd[idx] * m.latent_sd[idx];
    }
  }
  return s;
}

BarycentricHit locate_or_throw(const FittedModel& m, const Point2D& p, std::size_t index) {
  const TriangleLocator loc(m.mesh);
  const auto hit = loc.locate(p);
  if (!hit) throw PointOutsideMesh(index);
  return *hit;
}

double temporal_mean(const FittedModel& m, int t) {
  double v = 0.0;
  if (m.layout.trend) v += m.latent_mean[m.layout.trend->offset + t];
  if (m.layout.seasonal) v += m.latent_mean[m.layout.seasonal->offset + t];
  if (m.layout.cycle) v += m.latent_mean[m.layout.cycle->offset + t];
  if (m.layout.intercept) v += m.latent_mean[m.layout.intercept->offset];
  return v;
}

double temporal_var(const FittedModel& m, int t) {
  double v = 0.0;
  auto add = [&](Eigen::Index i) { v += m.latent_sd[i] * m.latent_sd[i]; };
  if (m.layout.trend) add(m.layout.trend->offset + t);
  if (m.layout.seasonal) add(m.layout.seasonal->offset + t);
  if (m.layout.cycle) add(m.layout.cycle->offset + t);
  if (m.layout.intercept) add(m.layout.intercept->offset);
  return v;
}

Station station_at(const Point2D& p) {
  Station s;
  s.location = p;
  return s;
}

double station_covariate(const Station& s, const std::string& name) {
  Dataset d;
  d.stations.push_back(s);
  return d.covariate(0, name);
}

}  // namespace

FittedModel make_fitted_model(const Dataset& data, const JointGMRF& gmrf, const InlaResult& result,
                              const TriangulatedMesh* mesh) {
  FittedModel m;
  m.spec = gmrf.spec;
  m.layout = gmrf.layout;
  m.times = data.times;
  m.stations = data.stations;
  m.last_observed = Vector::Constant(static_cast<Eigen::Index>(data.n_stations()), kNaN);
  for (Eigen::Index s = 0; s < data.values.rows(); ++s) {
    for (Eigen::Index t = data.values.cols() - 1; t >= 0; --t) {
      if (!std::isnan(data.values(s, t))) {
        m.last_observed[s] = data.values(s, t);
        break;
      }
    }
  }
  if (gmrf.spec.spatial != SpatialMode::off) {
    if (!mesh) throw InvalidArgument("make_fitted_model: spatial model without mesh");
    m.mesh = *mesh;
  }
  m.latent_mean = result.latent_mean;
  m.latent_sd = result.latent_sd;
  const HyperLayout layout(gmrf.spec);
  m.hyper.prec_gauss = hyper_mean(result, HyperKind::log_prec_gauss, layout, 1.0);
  m.hyper.prec_trend = hyper_mean(result, HyperKind::log_prec_trend, layout, 1.0);
  m.hyper.prec_seasonal = hyper_mean(result, HyperKind::log_prec_seasonal, layout, 1.0);
  m.hyper.prec_cycle = hyper_mean(result, HyperKind::log_prec_cycle, layout, 1.0);
  m.hyper.pacf1 = hyper_mean(result, HyperKind::z_pacf1, layout, 0.0);
  m.hyper.pacf2 = hyper_mean(result, HyperKind::z_pacf2, layout, 0.0);
  return m;
}

double station_fitted_value(const FittedModel& m, std::size_t station, int period) {
  if (station >= m.stations.size()) throw InvalidArgument("station index out of range");
  if (period < 0 || period >= m.periods()) throw InvalidArgument("period index out of range");
  double v = temporal_mean(m, period);
  const Station& st = m.stations[station];
  if (m.layout.spatial) v += spatial_at(m, locate_or_throw(m, st.location, station), period).mean;
  for (std::size_t k = 0; k < m.spec.covariates.size(); ++k) {
    v += station_covariate(st, m.spec.covariates[k]) *
         m.latent_mean[m.layout.betas->offset + static_cast<Eigen::Index>(k)];
  }
  return v;
}

Point2D GridRequest::node(int ix, int iy) const {
  return {xmin + (xmax - xmin) * ix / (nx - 1), ymin + (ymax - ymin) * iy / (ny - 1)};
}

SurfaceGrid fitted_surface(const FittedModel& m, const GridRequest& req) {
  if (req.nx < 2 || req.ny < 2) throw InvalidArgument("grid resolution must be at least 2 x 2");
  if (!(req.xmax > req.xmin) || !(req.ymax > req.ymin)) throw InvalidArgument("empty grid extent");
  if (req.period < 0 || req.period >= m.periods()) {
    throw InvalidArgument("grid period " + std::to_string(req.period) + " is outside the fitted range");
  }
  if (!m.layout.spatial) throw InvalidArgument("fitted surfaces need a model with a spatial block");
  std::vector<const Matrix*> rasters;
  for (const auto& name : m.spec.covariates) {
    if (name == "latitude" || name == "longitude") {
      rasters.push_back(nullptr);
      continue;
    }
    const auto it = req.covariates.find(name);
    if (it == req.covariates.end()) throw InvalidArgument("missing raster for covariate '" + name + "'");
    if (it->second.rows() != req.ny || it->second.cols() != req.nx) {
      throw InvalidArgument("raster for covariate '" + name + "' does not match the grid shape");
    }
    rasters.push_back(&it->second);
  }
  SurfaceGrid out;
  out.xmin = req.xmin;
  out.xmax = req.xmax;
  out.ymin = req.ymin;
  out.ymax = req.ymax;
  out.mean = Matrix::Constant(req.ny, req.nx, kNaN);
  out.sd = Matrix::Constant(req.ny, req.nx, kNaN);
  const TriangleLocator loc(m.mesh);
  const double base = temporal_mean(m, req.period);
  const double base_var = temporal_var(m, req.period);
  for (int iy = 0; iy < req.ny; ++iy) {
    for (int ix = 0; ix < req.nx; ++ix) {
      const Point2D p = req.node(ix, iy);
      const auto hit = loc.locate(p);
      if (!hit || !m.mesh.is_inner_triangle(hit->triangle)) continue;
      const SpatialTerm sp = spatial_at(m, *hit, req.period);
      double mean = base + sp.mean;
      double var = base_var + sp.var;
      for (std::size_t k = 0; k < rasters.size(); ++k) {
        const std::string& name = m.spec.covariates[k];
        const double x = rasters[k] ? (*rasters[k])(iy, ix) : station_covariate(station_at(p), name);
        const Eigen::Index b = m.layout.betas->offset + static_cast<Eigen::Index>(k);
        mean += x * m.latent_mean[b];
        var += x * x * m.latent_sd[b] * m.latent_sd[b];
      }
      out.mean(iy, ix) = mean;
      out.sd(iy, ix) = std::sqrt(var);
    }
  }
  return out;
}

void write_grid(std::ostream& out, const Matrix& values, const SurfaceGrid& f) {
  out << "ncols " << values.cols() << " nrows " << values.rows() << " xmin " << shortest(f.xmin)
      << " xmax " << shortest(f.xmax) << " ymin " << shortest(f.ymin) << " ymax " << shortest(f.ymax)
      << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out << ' ';
      if (std::isnan(values(r, c))) {
        out << "NA";
      } else {
        out << shortest(values(r, c));
      }
    }
    out << '\n';
  }
}

SurfaceGrid read_grid(std::istream& in) {
  std::string line;
  while (std::getline(in, line) && (line.empty() || line[0] == '#')) {
  }
  std::istringstream hs(line);
  std::string k1, k2, k3, k4, k5, k6;
  int nx = 0, ny = 0;
  SurfaceGrid g;
  if (!(hs >> k1 >> nx >> k2 >> ny >> k3 >> g.xmin >> k4 >> g.xmax >> k5 >> g.ymin >> k6 >> g.ymax) ||
      k1 != "ncols" || k2 != "nrows" || k3 != "xmin" || k4 != "xmax" || k5 != "ymin" || k6 != "ymax" ||
      nx < 1 || ny < 1) {
    throw DataError("grid: malformed header");
  }
  g.mean.resize(ny, nx);
  for (int r = 0; r < ny; ++r) {
    for (int c = 0; c < nx; ++c) {
      std::string tok;
      if (!(in >> tok)) throw DataError("grid: truncated values");
      if (tok == "NA") {
        g.mean(r, c) = kNaN;
      } else {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) throw DataError("grid: bad value '" + tok + "'");
        g.mean(r, c) = v;
      }
    }
  }
  g.sd = Matrix::Constant(ny, nx, kNaN);
  return g;
}

double covariate_adjustment(const Vector& beta, const Vector& covariate_means) {
  if (beta.size() != covariate_means.size()) {
    throw InvalidArgument("covariate_adjustment: " + std::to_string(beta.size()) + " coefficients but " +
                          std::to_string(covariate_means.size()) + " means");
  }
  return beta.dot(covariate_means);
}

// ---------------------------------------------------------------------------
// Forecasting

ComponentForecast forecast_recursion(const Vector& coef, const Vector& last, const Vector& last_var,
                                     double innovation_var, int h) {
  const Eigen::Index p = coef.size();
  if (last.size() != p || last_var.size() != p) throw InvalidArgument("forecast_recursion: state size");
  if (h < 1) throw InvalidArgument("forecast horizon must be at least 1");
  // history[j] expresses x_{T+1-j-1+...} as a combination of the initial states
  std::vector<Vector> combo;  // oldest first
  for (Eigen::Index i = p - 1; i >= 0; --i) combo.push_back(Vector::Unit(p, i));
  std::vector<double> psi;
  ComponentForecast out{Vector(h), Vector(h)};
  double psi_sq = 0.0;
  for (int k = 0; k < h; ++k) {
    Vector c = Vector::Zero(p);
    for (Eigen::Index i = 0; i < p; ++i) c += coef[i] * combo[combo.size() - 1 - static_cast<std::size_t>(i)];
    combo.push_back(c);
    double next_psi = k == 0 ? 1.0 : 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
      const auto j = static_cast<long>(k) - 1 - i;
      if (j >= 0) next_psi += coef[i] * psi[static_cast<std::size_t>(j)];
    }
    psi.push_back(next_psi);
    psi_sq += next_psi * next_psi;
    out.mean[k] = c.dot(last);
    out.variance[k] = c.cwiseProduct(c).dot(last_var) + innovation_var * psi_sq;
  }
  return out;
}

ForecastResult forecast(const FittedModel& m, int h) {
  if (h < 1) throw InvalidArgument("forecast horizon must be at least 1");
  const int T = m.periods();
  if (T < 1) throw InvalidArgument("forecast: model has no periods");
  ForecastResult r;
  r.horizon = h;
  const int last_index = m.times.back().index();
  for (int k = 1; k <= h; ++k) r.times.push_back(Period::from_index(last_index + k));
  auto sd2 = [&](Eigen::Index i) { return m.latent_sd[i] * m.latent_sd[i]; };
  const ComponentForecast zero{Vector::Zero(h), Vector::Zero(h)};

  r.trend = zero;
  if (m.layout.trend) {
    const Eigen::Index i = m.layout.trend->offset + T - 1;
    for (int k = 0; k < h; ++k) {
      r.trend.mean[k] = m.latent_mean[i];
      r.trend.variance[k] = sd2(i) + (k + 1) / m.hyper.prec_trend;
    }
  } else if (m.layout.intercept) {
    const Eigen::Index i = m.layout.intercept->offset;
    r.trend.mean.setConstant(m.latent_mean[i]);
    r.trend.variance.setConstant(sd2(i));
  }

  r.seasonal = zero;
  if (m.layout.seasonal) {
    const int p = m.spec.season_length - 1;
    Vector last(p), lv(p);
    for (int i = 0; i < p; ++i) {
      const Eigen::Index idx = m.layout.seasonal->offset + T - 1 - i;
      last[i] = m.latent_mean[idx];
      lv[i] = sd2(idx);
    }
    r.seasonal = forecast_recursion(Vector::Constant(p, -1.0), last, lv, 1.0 / m.hyper.prec_seasonal, h);
  }

  r.cycle = zero;
  if (m.layout.cycle) {
    const Ar2Coefficients ar = ar2_from_pacf(m.hyper.pacf1, m.hyper.pacf2);
    Vector last(2), lv(2);
    for (int i = 0; i < 2; ++i) {
      const Eigen::Index idx = m.layout.cycle->offset + std::max(T - 1 - i, 0);
      last[i] = T - 1 - i >= 0 ? m.latent_mean[idx] : 0.0;
      lv[i] = T - 1 - i >= 0 ? sd2(idx) : 0.0;
    }
    Vector coef(2);
    coef << ar.phi1, ar.phi2;
    r.cycle = forecast_recursion(coef, last, lv, 1.0 / m.hyper.prec_cycle, h);
  }

  const auto ns = static_cast<Eigen::Index>(m.stations.size());
  r.station_mean.resize(ns, h);
  r.station_sd.resize(ns, h);
  for (Eigen::Index s = 0; s < ns; ++s) {
    const Station& st = m.stations[static_cast<std::size_t>(s)];
    double fixed = 0.0, fixed_var = 0.0;
    if (m.layout.spatial) {
      const SpatialTerm sp = spatial_at(m, locate_or_throw(m, st.location, static_cast<std::size_t>(s)), -1);
      fixed += sp.mean;
      fixed_var += sp.var;
    }
    for (std::size_t k = 0; k < m.spec.covariates.size(); ++k) {
      const double x = station_covariate(st, m.spec.covariates[k]);
      const Eigen::Index b = m.layout.betas->offset + static_cast<Eigen::Index>(k);
      fixed += x * m.latent_mean[b];
      fixed_var += x * x * sd2(b);
    }
    for (int k = 0; k < h; ++k) {
      r.station_mean(s, k) = r.trend.mean[k] + r.seasonal.mean[k] + r.cycle.mean[k] + fixed;
      r.station_sd(s, k) = std::sqrt(r.trend.variance[k] + r.seasonal.variance[k] + r.cycle.variance[k] +
                                     fixed_var + 1.0 / m.hyper.prec_gauss);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Metrics

const char* const kMetricsHeader = "ME RMSE MAE MPE MAPE ACF1 TheilsU";

namespace {

ForecastMetrics base_metrics(const Vector& predicted, const Vector& observed) {
  if (predicted.size() != observed.size()) throw InvalidArgument("forecast_metrics: length mismatch");
  if (predicted.size() < 2) throw InvalidArgument("forecast_metrics: need at least two values");
  const Vector e = observed - predicted;
  const auto n = static_cast<double>(e.size());
  ForecastMetrics m;
  m.me = e.mean();
  m.rmse = std::sqrt(e.squaredNorm() / n);
  m.mae = e.cwiseAbs().mean();
  if ((observed.array() == 0.0).any()) {
    m.mpe = m.mape = kNaN;
  } else {
    const Eigen::ArrayXd rel = e.array() / observed.array();
    m.mpe = 100.0 * rel.mean();
    m.mape = 100.0 * rel.abs().mean();
  }
  const Eigen::ArrayXd c = e.array() - m.me;
  const double denom = c.square().sum();
  m.acf1 = denom > 0 ? (c.head(c.size() - 1) * c.tail(c.size() - 1)).sum() / denom : kNaN;
  return m;
}

}  // namespace

ForecastMetrics forecast_metrics(const Vector& predicted, const Vector& observed) {
  ForecastMetrics m = base_metrics(predicted, observed);
  const Eigen::Index n = observed.size();
  const Vector e = (observed - predicted).tail(n - 1);
  const Vector naive = observed.tail(n - 1) - observed.head(n - 1);
  const double denom = naive.squaredNorm();
  m.theils_u = denom > 0 ? std::sqrt(e.squaredNorm() / denom) : kNaN;
  return m;
}

ForecastMetrics forecast_metrics(const Vector& predicted, const Vector& observed, const Vector& naive) {
  ForecastMetrics m = base_metrics(predicted, observed);
  if (naive.size() != observed.size()) throw InvalidArgument("forecast_metrics: naive length mismatch");
  const double denom = (observed - naive).squaredNorm();
  m.theils_u = denom > 0 ? std::sqrt((observed - predicted).squaredNorm() / denom) : kNaN;
  return m;
}

std::string format_metrics_row(const ForecastMetrics& m) {
  std::ostringstream os;
  os.precision(6);
  bool first = true;
  for (double v : {m.me, m.rmse, m.mae, m.mpe, m.mape, m.acf1, m.theils_u}) {
    if (!first) os << ' ';
    first = false;
    if (std::isnan(v)) {
      os << "NA";
    } else {
      os << v;
    }
  }
  return os.str();
}

}  // namespace stsm
