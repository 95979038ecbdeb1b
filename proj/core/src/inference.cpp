#include "stsm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "stsm/errors.hpp"
#include "stsm/temporal.hpp"

namespace stsm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

bool is_log_precision(HyperKind k) {
  return k == HyperKind::log_prec_gauss || k == HyperKind::log_prec_trend ||
         k == HyperKind::log_prec_seasonal || k == HyperKind::log_prec_cycle;
}

}  // namespace

// ---------------------------------------------------------------------------
// Priors

HyperPrior HyperPrior::log_gamma(double shape, double rate) {
  if (!(shape > 0) || !(rate > 0)) throw InvalidArgument("log-gamma prior needs shape, rate > 0");
  return {Family::log_gamma, shape, rate};
}

HyperPrior HyperPrior::gaussian(double mean, double precision) {
  if (!(precision > 0) || !std::isfinite(mean)) {
    throw InvalidArgument("Gaussian prior needs a finite mean and positive precision");
  }
  return {Family::gaussian, mean, precision};
}

double HyperPrior::log_density(double theta) const {
  if (family == Family::log_gamma) {
    return a * std::log(b) - std::lgamma(a) + a * theta - b * std::exp(theta);
  }
  const double d = theta - a;
  return 0.5 * std::log(b / (2.0 * std::numbers::pi)) - 0.5 * b * d * d;
}

std::string HyperPrior::describe() const {
  std::ostringstream os;
  os << std::setprecision(6);
  if (family == Family::log_gamma) {
    os << "loggamma(shape=" << a << ", rate=" << b << ")";
  } else {
    os << "normal(mean=" << a << ", precision=" << b << ")";
  }
  return os.str();
}

double PriorSet::log_density(const Vector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != entries.size()) {
    throw InvalidArgument("PriorSet: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) s += entries[i].log_density(theta[static_cast<Eigen::Index>(i)]);
  return s;
}

PriorSet make_priors(const ModelSpec& spec, const PriorOptions& options) {
  const HyperLayout layout(spec);
  PriorSet set;
  double tau_mode = 0.0, kappa_mode = 0.0;
  if (spec.spatial != SpatialMode::off) {
    const MaternParams mp = params_from_sigma_rho(options.sigma0, options.rho0);
    tau_mode = mp.log_tau;
    kappa_mode = mp.log_kappa;
  }
  const double sa = options.spatial_shape;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const HyperKind k = layout.kind(i);
    if (is_log_precision(k)) {
      set.entries.push_back(HyperPrior::log_gamma(options.precision_shape, options.precision_rate));
    } else if (k == HyperKind::z_pacf1 || k == HyperKind::z_pacf2) {
      set.entries.push_back(HyperPrior::gaussian(0.0, options.pacf_precision));
    } else if (k == HyperKind::log_tau) {
      set.entries.push_back(HyperPrior::log_gamma(sa, sa * std::exp(-tau_mode)));
    } else if (k == HyperKind::log_kappa) {
      set.entries.push_back(HyperPrior::log_gamma(sa, sa * std::exp(-kappa_mode)));
    } else {
      set.entries.push_back(HyperPrior::gaussian(0.0, options.theta_tau_precision));
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Posterior of theta

ThetaPosterior::ThetaPosterior(const JointGMRF& gmrf, PriorSet priors)
    : gmrf_(&gmrf), layout_(gmrf.spec), priors_(std::move(priors)), constants_(prior_constants(gmrf)) {
  if (priors_.entries.size() != layout_.size()) {
    throw InvalidArgument("ThetaPosterior: " + std::to_string(priors_.entries.size()) +
                          " priors for " + std::to_string(layout_.size()) + " hyperparameters");
  }
  if (gmrf.spec.spatial != SpatialMode::off && !gmrf.fem) {
    throw InvalidArgument("ThetaPosterior: spatial model without FEM matrices");
  }
}

bool ThetaPosterior::in_bounds(const Vector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != layout_.size()) return false;
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    const double v = theta[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(v)) return false;
    const HyperKind k = layout_.kind(i);
    const double bound = (k == HyperKind::z_pacf1 || k == HyperKind::z_pacf2) ? 15.0 : kLogPrecisionBound;
    if (std::abs(v) > bound) return false;
  }
  return true;
}

double ThetaPosterior::log_evidence(const Vector& theta) const {
  ++evaluations_;
  if (!in_bounds(theta)) {
    last_failure_ = "hyperparameters outside bounds";
    return kNegInf;
  }
  try {
    const HyperParams h = layout_.unpack(theta);
    const PriorEvaluation prior = evaluate_prior(*gmrf_, constants_, h);
    const GaussianPosterior post =
        gaussian_posterior(*gmrf_, prior.precision, gmrf_->y, h.log_prec_gauss, constants_.posterior_ordering);
    const double v = stsm::log_evidence(*gmrf_, prior, h, post);
    if (!std::isfinite(v)) {
      last_failure_ = "non-finite log evidence";
      return kNegInf;
    }
    return v;
  } catch (const NumericalError& e) {
    last_failure_ = e.what();
    return kNegInf;
  }
}

double ThetaPosterior::operator()(const Vector& theta) const {
  const double ev = log_evidence(theta);
  if (!std::isfinite(ev)) return kNegInf;
  return ev + priors_.log_density(theta);
}

GaussianPosterior ThetaPosterior::posterior(const Vector& theta) const {
  const HyperParams h = layout_.unpack(theta);
  const PriorEvaluation prior = evaluate_prior(*gmrf_, constants_, h);
  return gaussian_posterior(*gmrf_, prior.precision, gmrf_->y, h.log_prec_gauss, constants_.posterior_ordering);
}

double log_posterior_theta(const JointGMRF& gmrf, const Vector& y, const HyperParams& theta,
                           const PriorSet& priors) {
  if (y.size() != gmrf.n_obs()) throw InvalidArgument("log_posterior_theta: y length mismatch");
  JointGMRF copy = gmrf;
  copy.y = y;
  const ThetaPosterior post(copy, priors);
  return post(post.layout().pack(theta));
}

// ---------------------------------------------------------------------------
// Optimisation

namespace {

Vector gradient(const LogDensity& f, const Vector& x, double fx, double h, std::size_t& evals) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fp = f(xp), fm = f(xm);
    evals += 2;
    if (std::isfinite(fp) && std::isfinite(fm)) {
      g[i] = (fp - fm) / (2.0 * h);
    } else if (std::isfinite(fp)) {
      g[i] = (fp - fx) / h;
    } else if (std::isfinite(fm)) {
      g[i] = (fx - fm) / h;
    } else {
      g[i] = 0.0;
    }
  }
  return g;
}

}  // namespace

Matrix numerical_negative_hessian(const LogDensity& f, const Vector& x, double step, double fx) {
  const Eigen::Index d = x.size();
  for (int attempt = 0; attempt < 6; ++attempt, step *= 0.5) {
    Matrix h(d, d);
    bool finite = true;
    auto at = [&](Eigen::Index i, double si, Eigen::Index j, double sj) {
      Vector p = x;
      p[i] += si;
      p[j] += sj;
      const double v = f(p);
      finite = finite && std::isfinite(v);
      return v;
    };
    for (Eigen::Index i = 0; i < d && finite; ++i) {
      const double fp = at(i, step, i, 0.0);
      const double fm = at(i, -step, i, 0.0);
      h(i, i) = -(fp - 2.0 * fx + fm) / (step * step);
      for (Eigen::Index j = 0; j < i && finite; ++j) {
        const double v = at(i, step, j, step) - at(i, step, j, -step) - at(i, -step, j, step) +
                         at(i, -step, j, -step);
        h(i, j) = h(j, i) = -v / (4.0 * step * step);
      }
    }
    if (finite) return h;
  }
  throw NumericalError("Hessian stencil leaves the region where the posterior is finite");
}

Matrix floor_eigenvalues(const Matrix& h, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
  const Vector ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

OptimizationResult optimize_theta(const LogDensity& f, const Vector& init,
                                  const OptimizerOptions& options) {
  OptimizationResult res;
  const Eigen::Index d = init.size();
  Vector x = init;
  double fx = f(x);
  std::size_t evals = 1;
  if (!std::isfinite(fx)) throw NumericalError("posterior density is zero at the initial hyperparameters");
  Vector g = gradient(f, x, fx, options.gradient_step, evals);
  Matrix hinv = Matrix::Identity(d, d);
  bool fresh = true;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Vector p = hinv * g;
    if (p.dot(g) <= 0) {
      hinv.setIdentity();
      fresh = true;
      p = g;
    }
    const double pmax = p.lpNorm<Eigen::Infinity>();
    if (pmax > options.max_step) p *= options.max_step / pmax;
    const double slope = p.dot(g);
    double t = 1.0;
    double fn = kNegInf;
    Vector xn;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      xn = x + t * p;
      fn = f(xn);
      ++evals;
      if (std::isfinite(fn) && fn >= fx + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!fresh) {
        hinv.setIdentity();
        fresh = true;
        continue;
      }
      res.message = "line search failed";
      break;
    }
    const Vector gn = gradient(f, xn, fn, options.gradient_step, evals);
    const Vector s = xn - x;
    const Vector y = g - gn;  // gradient change of -f
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) hinv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Matrix e = Matrix::Identity(d, d) - rho * s * y.transpose();
      hinv = e * hinv * e.transpose() + rho * s * s.transpose();
      fresh = false;
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  if (!res.converged && g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) res.converged = true;
  if (!res.converged && res.message.empty()) res.message = "iteration limit reached";
  res.mode = x;
  res.log_density = fx;
  res.iterations = iter;
  const Matrix raw = numerical_negative_hessian(f, x, options.hessian_step, fx);
  evals += static_cast<std::size_t>(2 * d * d);
  res.hessian = floor_eigenvalues(raw, options.eigenvalue_floor);
  res.evaluations = evals;
  return res;
}

// ---------------------------------------------------------------------------
// Grid

namespace {

double log_cell_volume(const ThetaGrid& grid, std::size_t k) {
  return grid.log_volume.size() == grid.size() ? grid.log_volume[k] : 0.0;
}

double half_axis_scale(double drop) {
  // Gaussian drop at sqrt(2) standardized units is exactly 1
  constexpr double kMin = 0.2;
  constexpr double kMax = 5.0;
  if (std::isnan(drop)) return 1.0;
  if (drop == std::numeric_limits<double>::infinity()) return kMin;
  if (!(drop > 0)) return kMax;
  return std::clamp(std::sqrt(1.0 / drop), kMin, kMax);
}

}  // namespace

void normalize_weights(ThetaGrid& grid) {
  std::vector<double> lw(grid.size());
  for (std::size_t k = 0; k < lw.size(); ++k) lw[k] = grid.log_posterior[k] + log_cell_volume(grid, k);
  const double mx = *std::max_element(lw.begin(), lw.end());
  grid.weights.resize(lw.size());
  double s = 0.0;
  for (std::size_t k = 0; k < lw.size(); ++k) {
    grid.weights[k] = std::exp(lw[k] - mx);
    s += grid.weights[k];
  }
  for (double& w : grid.weights) w /= s;
}

ThetaGrid explore_grid(const LogDensity& f, const Vector& mode, const Matrix& hessian,
                       const GridOptions& options) {
  if (!(options.delta > 0)) throw InvalidArgument("explore_grid: delta must be positive");
  if (options.cutoff < 0) throw InvalidArgument("explore_grid: cutoff must be non-negative");
  const Eigen::Index d = mode.size();
  if (hessian.rows() != d || hessian.cols() != d) throw InvalidArgument("explore_grid: Hessian shape");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (hessian + hessian.transpose()));
  if (es.eigenvalues().minCoeff() <= 0) throw InvalidArgument("explore_grid: Hessian is not SPD");

  ThetaGrid grid;
  grid.mode = mode;
  grid.hessian = hessian;
  grid.delta = options.delta;
  grid.cutoff = options.cutoff;
  grid.axes = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
  grid.scale_pos = Vector::Ones(d);
  grid.scale_neg = Vector::Ones(d);

  const double f0 = f(mode);
  grid.evaluations = 1;
  if (!std::isfinite(f0)) throw NumericalError("explore_grid: density is zero at the mode");

  if (options.skew_correction && options.cutoff > 0) {
    const double probe = std::sqrt(2.0);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (const double sign : {1.0, -1.0}) {
        const double v = f(mode + sign * probe * grid.axes.col(i));
        ++grid.evaluations;
        const double drop = std::isfinite(v) ? f0 - v : std::numeric_limits<double>::infinity();
        (sign > 0 ? grid.scale_pos : grid.scale_neg)[i] = half_axis_scale(drop);
      }
    }
  }

  auto theta_of = [&](const Vector& z) {
    Vector u(d);
    for (Eigen::Index i = 0; i < d; ++i) u[i] = z[i] * (z[i] >= 0 ? grid.scale_pos[i] : grid.scale_neg[i]);
    return Vector(mode + grid.axes * u);
  };
  auto log_volume = [&](const Vector& z) {
    double lv = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double s = z[i] > 0 ? grid.scale_pos[i]
                       : z[i] < 0 ? grid.scale_neg[i]
                                  : 0.5 * (grid.scale_pos[i] + grid.scale_neg[i]);
      lv += std::log(s);
    }
    return lv;
  };
  auto add = [&](const Vector& z, const Vector& theta, double v) {
    grid.points.push_back(theta);
    grid.log_posterior.push_back(v);
    grid.z.push_back(z);
    grid.log_volume.push_back(log_volume(z));
  };
  add(Vector::Zero(d), mode, f0);

  using Key = std::vector<int>;
  std::map<Key, bool> seen;
  std::deque<Key> queue;
  const Key origin(static_cast<std::size_t>(d), 0);
  seen[origin] = true;
  queue.push_back(origin);
  while (!queue.empty()) {
    const Key cur = queue.front();
    queue.pop_front();
    for (Eigen::Index j = 0; j < d; ++j) {
      for (int step : {1, -1}) {
        Key next = cur;
        next[static_cast<std::size_t>(j)] += step;
        if (seen.count(next)) continue;
        if (grid.points.size() >= options.max_points) {
          grid.truncated = true;
          continue;
        }
        Vector z(d);
        for (Eigen::Index i = 0; i < d; ++i) z[i] = options.delta * next[static_cast<std::size_t>(i)];
        const Vector theta = theta_of(z);
        const double v = f(theta);
        ++grid.evaluations;
        const bool keep = std::isfinite(v) && f0 - v <= options.cutoff;
        seen[next] = keep;
        if (keep) {
          add(z, theta, v);
          queue.push_back(next);
        }
      }
    }
  }
  normalize_weights(grid);
  return grid;
}

// ---------------------------------------------------------------------------
// Mixture summaries

namespace {

struct Mixture {
  const std::vector<double>& w;
  const Vector& m;
  const Vector& s;

  double cdf(double x) const {
    double c = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      c += w[k] * (s[i] > 0 ? normal_cdf((x - m[i]) / s[i]) : (x >= m[i] ? 1.0 : 0.0));
    }
    return c;
  }
  double pdf(double x) const {
    double p = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      if (s[i] > 0) p += w[k] * normal_pdf((x - m[i]) / s[i]) / s[i];
    }
    return p;
  }
};

double mixture_quantile(const Mixture& mix, double p, const std::vector<double>& xs,
                        const std::vector<double>& cdfs) {
  std::size_t i = 0;
  while (i < xs.size() && cdfs[i] < p) ++i;
  double lo, hi;
  const double span = xs.back() - xs.front();
  if (i == 0) {
    hi = xs.front();
    lo = hi - span;
    while (mix.cdf(lo) >= p) lo -= span;
  } else if (i == xs.size()) {
    lo = xs.back();
    hi = lo + span;
    while (mix.cdf(hi) < p) hi += span;
  } else {
    lo = xs[i - 1];
    hi = xs[i];
  }
  for (int it = 0; it < 100 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mix.cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

MarginalSummary summarize_mixture(const std::vector<double>& weights, const Vector& means,
                                  const Vector& sds) {
  const auto n = weights.size();
  if (n == 0 || static_cast<std::size_t>(means.size()) != n || static_cast<std::size_t>(sds.size()) != n) {
    throw InvalidArgument("summarize_mixture: inconsistent component arrays");
  }
  MarginalSummary out;
  double wsum = 0.0, m1 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    wsum += weights[k];
    m1 += weights[k] * means[static_cast<Eigen::Index>(k)];
  }
  m1 /= wsum;
  double var = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double dm = means[i] - m1;
    var += weights[k] * (sds[i] * sds[i] + dm * dm);
  }
  var /= wsum;
  out.mean = m1;
  out.sd = std::sqrt(std::max(var, 0.0));
  if (!(out.sd > 0)) {
    out.q025 = out.q50 = out.q975 = out.mode = m1;
    return out;
  }
  std::vector<double> w(weights);
  for (double& x : w) x /= wsum;
  const Mixture mix{w, means, sds};
  constexpr int kPoints = 400;
  std::vector<double> xs(kPoints), cdfs(kPoints), pdfs(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    xs[i] = m1 - 6.0 * out.sd + 12.0 * out.sd * i / (kPoints - 1);
    cdfs[i] = mix.cdf(xs[i]);
    pdfs[i] = mix.pdf(xs[i]);
  }
  out.q025 = mixture_quantile(mix, 0.025, xs, cdfs);
  out.q50 = mixture_quantile(mix, 0.5, xs, cdfs);
  out.q975 = mixture_quantile(mix, 0.975, xs, cdfs);

  const auto best = static_cast<int>(std::max_element(pdfs.begin(), pdfs.end()) - pdfs.begin());
  double lo = xs[std::max(best - 1, 0)];
  double hi = xs[std::min(best + 1, kPoints - 1)];
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = mix.pdf(a), fb = mix.pdf(b);
  for (int it = 0; it < 80; ++it) {
    if (fa > fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = mix.pdf(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = mix.pdf(b);
    }
  }
  out.mode = 0.5 * (lo + hi);
  return out;
}

// ---------------------------------------------------------------------------
// Latent field over the grid

GridComponents grid_components(const ThetaPosterior& post, const ThetaGrid& grid,
                               bool with_variances) {
  const JointGMRF& g = post.model();
  GridComponents comps;
  const Eigen::SparseMatrix<double, Eigen::RowMajor> a = g.design;
  for (const Vector& theta : grid.points) {
    const GaussianPosterior gp = post.posterior(theta);
    comps.means.push_back(gp.mean);
    if (!with_variances) continue;
    const SparseMatrix sigma = gp.cholesky.selected_inverse();
    Vector var = sigma.diagonal();
    Matrix s_inv_wt;
    if (gp.constraint_solve.cols() > 0) {
      s_inv_wt = gp.constraint_gram.ldlt().solve(gp.constraint_solve.transpose());
      var -= gp.constraint_solve.cwiseProduct(s_inv_wt.transpose()).rowwise().sum();
    }
    comps.variances.push_back(var.cwiseMax(0.0));

    // E ||y - A x||^2 = ||y - A mu||^2 + tr(A Sigma A')
    double trace = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      double q = 0.0;
      for (decltype(a)::InnerIterator i1(a, r); i1; ++i1) {
        for (decltype(a)::InnerIterator i2(a, r); i2; ++i2) {
          q += i1.value() * i2.value() * sigma.coeff(i1.col(), i2.col());
        }
      }
      if (gp.constraint_solve.cols() > 0) {
        Eigen::RowVectorXd aw = Eigen::RowVectorXd::Zero(gp.constraint_solve.cols());
        Eigen::RowVectorXd as = Eigen::RowVectorXd::Zero(gp.constraint_solve.cols());
        for (decltype(a)::InnerIterator it(a, r); it; ++it) {
          aw += it.value() * gp.constraint_solve.row(it.col());
          as += it.value() * s_inv_wt.col(it.col()).transpose();
        }
        q -= aw.dot(as);
      }
      trace += std::max(q, 0.0);
    }
    comps.expected_sse.push_back((g.y - g.design * gp.mean).squaredNorm() + trace);
  }
  return comps;
}

Vector latent_mixture_mean(const ThetaGrid& grid, const GridComponents& comps) {
  Vector m = Vector::Zero(comps.means.front().size());
  for (std::size_t k = 0; k < grid.size(); ++k) m += grid.weights[k] * comps.means[k];
  return m;
}

std::vector<MarginalSummary> latent_marginals(const ThetaGrid& grid, const GridComponents& comps) {
  if (comps.variances.size() != grid.size()) {
    throw InvalidArgument("latent_marginals: component variances were not computed");
  }
  const Eigen::Index n = comps.means.front().size();
  const auto k = static_cast<Eigen::Index>(grid.size());
  std::vector<MarginalSummary> out(static_cast<std::size_t>(n));
  Vector m(k), s(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < k; ++c) {
      m[c] = comps.means[static_cast<std::size_t>(c)][i];
      s[c] = std::sqrt(comps.variances[static_cast<std::size_t>(c)][i]);
    }
    out[static_cast<std::size_t>(i)] = summarize_mixture(grid.weights, m, s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hyperparameter marginals

double to_user_scale(HyperKind kind, double theta) {
  if (is_log_precision(kind)) return std::exp(theta);
  if (kind == HyperKind::z_pacf1 || kind == HyperKind::z_pacf2) return pacf_from_internal(theta);
  return theta;
}

namespace {

MarginalSummary user_scale_summary(HyperKind kind, const std::vector<double>& w, const Vector& m,
                                   const Vector& s, const MarginalSummary& internal) {
  MarginalSummary u;
  auto g = [kind](double x) { return to_user_scale(kind, x); };
  u.q025 = g(internal.q025);
  u.q50 = g(internal.q50);
  u.q975 = g(internal.q975);
  if (!(internal.sd > 0)) {
    u.mean = u.mode = g(internal.mean);
    u.sd = 0.0;
    return u;
  }
  if (!is_log_precision(kind) && kind != HyperKind::z_pacf1 && kind != HyperKind::z_pacf2) {
    return internal;
  }
  const Mixture mix{w, m, s};
  constexpr int kPoints = 4001;
  const double lo = internal.mean - 8.0 * internal.sd;
  const double hi = internal.mean + 8.0 * internal.sd;
  const double h = (hi - lo) / (kPoints - 1);
  double z = 0.0, e1 = 0.0, e2 = 0.0, best = -1.0, best_x = internal.mean;
  for (int i = 0; i < kPoints; ++i) {
    const double x = lo + h * i;
    const double p = mix.pdf(x);
    const double y = g(x);
    const double wt = (i == 0 || i == kPoints - 1) ? 0.5 : 1.0;
    z += wt * p;
    e1 += wt * p * y;
    e2 += wt * p * y * y;
    // density of y = g(x) is p(x) / g'(x)
    const double dy = is_log_precision(kind) ? y : 0.5 * (1.0 - y * y);
    const double py = p / dy;
    if (py > best) {
      best = py;
      best_x = x;
    }
  }
  u.mean = e1 / z;
  u.sd = std::sqrt(std::max(e2 / z - u.mean * u.mean, 0.0));
  u.mode = g(best_x);
  return u;
}

}  // namespace

std::vector<HyperSummary> hyper_marginals(const ThetaGrid& grid, const HyperLayout& layout) {
  if (grid.size() == 0) throw InvalidArgument("hyper_marginals: empty grid");
  const auto d = static_cast<Eigen::Index>(grid.dim());
  const auto k = static_cast<Eigen::Index>(grid.size());
  std::vector<HyperSummary> out;
  // Gaussian reference in lattice coordinates: the variance the lattice
  // would capture if the density were exactly the (half-axis scaled) Laplace
  // approximation, against the variance that approximation really has.
  Matrix axes = grid.axes;
  Vector sp = grid.scale_pos;
  Vector sn = grid.scale_neg;
  std::vector<Vector> zs = grid.z;
  if (zs.size() != grid.size() || axes.rows() != d) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (grid.hessian + grid.hessian.transpose()));
    axes = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
    sp = sn = Vector::Ones(d);
    const Matrix to_z = es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    zs.clear();
    for (const auto& p : grid.points) zs.push_back(to_z * (p - grid.mode));
  }
  Vector full_var = Vector::Zero(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double half = 0.5 * (sp[i] * sp[i] + sn[i] * sn[i]) -
                        (sp[i] - sn[i]) * (sp[i] - sn[i]) / (2.0 * std::numbers::pi);
    full_var += axes.col(i).cwiseAbs2() * half;
  }
  std::vector<double> ref(grid.size());
  double ref_sum = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    ref[ci] = std::exp(-0.5 * zs[ci].squaredNorm() + log_cell_volume(grid, ci));
    ref_sum += ref[ci];
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    Vector x(k);
    for (Eigen::Index c = 0; c < k; ++c) x[c] = grid.points[static_cast<std::size_t>(c)][j];
    double ref_mean = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      ref_mean += ref[static_cast<std::size_t>(c)] * x[c] / ref_sum;
    }
    double ref_var = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      ref_var += ref[static_cast<std::size_t>(c)] / ref_sum * (x[c] - ref_mean) * (x[c] - ref_mean);
    }
    // kernel variance restores what the truncated lattice misses; a lone
    // mode carries no spread information and stays a point mass
    const double bw2 = k > 1 ? std::max(full_var[j] - ref_var, 0.0) : 0.0;
    const Vector s = Vector::Constant(k, std::sqrt(bw2));
    HyperSummary hs;
    const auto idx = static_cast<std::size_t>(j);
    hs.name = layout.name(idx);
    hs.internal_name = layout.internal_name(idx);
    hs.internal = summarize_mixture(grid.weights, x, s);
    hs.user = user_scale_summary(layout.kind(idx), grid.weights, x, s, hs.internal);
    out.push_back(hs);
  }
  return out;
}

double marginal_likelihood(const ThetaGrid& grid) {
  std::vector<double> lw(grid.size());
  for (std::size_t k = 0; k < lw.size(); ++k) lw[k] = grid.log_posterior[k] + log_cell_volume(grid, k);
  const double mx = *std::max_element(lw.begin(), lw.end());
  double s = 0.0;
  for (double v : lw) s += std::exp(v - mx);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(grid.hessian, Eigen::EigenvaluesOnly);
  const double log_det = es.eigenvalues().array().log().sum();
  return mx + std::log(s) + static_cast<double>(grid.dim()) * std::log(grid.delta) - 0.5 * log_det;
}

DicResult dic(const ThetaPosterior& post, const ThetaGrid& grid, const GridComponents& comps) {
  if (comps.expected_sse.size() != grid.size()) {
    throw InvalidArgument("dic: expected deviances were not computed");
  }
  const JointGMRF& g = post.model();
  const auto n = static_cast<double>(g.n_obs());
  const double log2pi = std::log(2.0 * std::numbers::pi);
  // the noise log-precision is always the first hyperparameter
  double dbar = 0.0, tau_mean = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double lp = grid.points[k][0];
    dbar += grid.weights[k] * (n * log2pi - n * lp + std::exp(lp) * comps.expected_sse[k]);
    tau_mean += grid.weights[k] * std::exp(lp);
  }
  const Vector xbar = latent_mixture_mean(grid, comps);
  const double d_at_mean =
      n * log2pi - n * std::log(tau_mean) + tau_mean * (g.y - g.design * xbar).squaredNorm();
  DicResult r;
  r.mean_deviance = dbar;
  r.effective_parameters = dbar - d_at_mean;
  r.dic = dbar + r.effective_parameters;
  return r;
}

// ---------------------------------------------------------------------------

Vector default_initial_theta(const ThetaPosterior& post) {
  const JointGMRF& g = post.model();
  double var = 1.0;
  if (g.n_obs() > 1) {
    const double m = g.y.mean();
    var = (g.y.array() - m).square().sum() / static_cast<double>(g.n_obs() - 1);
    if (!(var > 0)) var = 1.0;
  }
  const HyperLayout& layout = post.layout();
  Vector theta(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const HyperPrior& pr = post.priors().entries[i];
    const HyperKind k = layout.kind(i);
    double v;
    if (is_log_precision(k)) {
      v = std::log(4.0 / var);
    } else if (pr.family == HyperPrior::Family::gaussian) {
      v = pr.a;
    } else {
      v = std::log(pr.a / pr.b);
    }
    theta[static_cast<Eigen::Index>(i)] = std::clamp(v, -kLogPrecisionBound + 1, kLogPrecisionBound - 1);
  }
  return theta;
}

InlaResult fit_inla(const ThetaPosterior& post, const InlaOptions& options, const Vector* init) {
  const LogDensity f = [&post](const Vector& t) { return post(t); };
  InlaResult res;
  const HyperLayout& layout = post.layout();
  for (std::size_t i = 0; i < layout.size(); ++i) res.hyper_names.push_back(layout.name(i));
  res.layout = post.model().layout;
  const Vector start = init ? *init : default_initial_theta(post);
  res.optimization = optimize_theta(f, start, options.optimizer);
  res.theta_grid = explore_grid(f, res.optimization.mode, res.optimization.hessian, options.grid);
  const GridComponents comps = grid_components(post, res.theta_grid, true);
  res.latent_mean = latent_mixture_mean(res.theta_grid, comps);
  res.latent_sd = Vector::Zero(res.latent_mean.size());
  for (std::size_t k = 0; k < res.theta_grid.size(); ++k) {
    const Vector d = comps.means[k] - res.latent_mean;
    res.latent_sd += res.theta_grid.weights[k] * (comps.variances[k] + d.cwiseProduct(d));
  }
  res.latent_sd = res.latent_sd.cwiseMax(0.0).cwiseSqrt();
  if (options.latent_quantiles) res.latent = latent_marginals(res.theta_grid, comps);
  res.hyper = hyper_marginals(res.theta_grid, layout);
  Vector tmean = Vector::Zero(res.theta_grid.mode.size());
  for (std::size_t k = 0; k < res.theta_grid.size(); ++k) {
    tmean += res.theta_grid.weights[k] * res.theta_grid.points[k];
  }
  res.mean_hyper = layout.unpack(tmean);
  res.log_marginal_likelihood = marginal_likelihood(res.theta_grid);
  res.dic = dic(post, res.theta_grid, comps);
  return res;
}

std::string format_report(const InlaResult& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(20) << "" << std::right;
  for (const char* h : {"mean", "sd", "0.025q", "0.5q", "0.975q", "mode"}) os << std::setw(12) << h;
  os << '\n';
  for (const auto& h : r.hyper) {
    os << std::left << std::setw(20) << h.name << std::right;
    for (double v : {h.user.mean, h.user.sd, h.user.q025, h.user.q50, h.user.q975, h.user.mode}) {
      os << std::setw(12) << v;
    }
    os << '\n';
  }
  os << "Marginal Lik. " << r.log_marginal_likelihood << '\n';
  os << "DIC " << r.dic.dic << '\n';
  os << "Effective parameters " << r.dic.effective_parameters << '\n';
  os << "Optimizer iterations " << r.optimization.iterations << (r.optimization.converged ? "" : " (not converged: " + r.optimization.message + ")") << '\n';
  os << "Grid points " << r.theta_grid.size() << '\n';
  return os.str();
}

}  // namespace stsm
