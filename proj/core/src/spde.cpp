#include "stsm/spde.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "stsm/errors.hpp"

namespace stsm {

double MaternParams::tau() const { return std::exp(log_tau); }
double MaternParams::kappa() const { return std::exp(log_kappa); }

FemMatrices assemble_fem(const TriangulatedMesh& mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
  std::vector<Eigen::Triplet<double>> ct, gt;
  ct.reserve(mesh.triangles.size() * 9);
  gt.reserve(mesh.triangles.size() * 9);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Point2D& p0 = mesh.vertices[tri[0]];
    const Point2D& p1 = mesh.vertices[tri[1]];
    const Point2D& p2 = mesh.vertices[tri[2]];
    const double area = signed_area(p0, p1, p2);
    if (!(area > 0)) {
      throw DataError("assemble_fem: triangle " + std::to_string(t) + " has non-positive area");
    }
    // edge opposite vertex k
    const double ex[3] = {p2.x - p1.x, p0.x - p2.x, p1.x - p0.x};
    const double ey[3] = {p2.y - p1.y, p0.y - p2.y, p1.y - p0.y};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        ct.emplace_back(tri[i], tri[j], i == j ? area / 6.0 : area / 12.0);
        gt.emplace_back(tri[i], tri[j], (ex[i] * ex[j] + ey[i] * ey[j]) / (4.0 * area));
      }
    }
  }
  FemMatrices fem;
  fem.c.resize(n, n);
  fem.c.setFromTriplets(ct.begin(), ct.end());
  fem.g.resize(n, n);
  fem.g.setFromTriplets(gt.begin(), gt.end());
  fem.c_lumped = fem.c * Vector::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(fem.c_lumped[i] > 0)) {
      throw DataError("assemble_fem: vertex " + std::to_string(i) + " belongs to no triangle");
    }
  }
  const Vector inv = fem.c_lumped.cwiseInverse();
  fem.g_cinv_g = SparseMatrix(fem.g * inv.asDiagonal() * fem.g);
  return fem;
}

namespace {

void require_alpha_two(const MaternParams& params) {
  if (params.d != 2 || std::abs(params.alpha() - 2.0) > 1e-12) {
    throw InvalidArgument("SPDE precision: only alpha = 2 (nu = 1, d = 2) is supported");
  }
}

// kappa^4 C~ + 2 kappa^2 G + G C~^{-1} G
SparseMatrix unit_tau_precision(const FemMatrices& fem, double kappa) {
  const double k2 = kappa * kappa;
  SparseMatrix lumped(fem.c_lumped.size(), fem.c_lumped.size());
  lumped.reserve(Eigen::VectorXi::Constant(fem.c_lumped.size(), 1));
  for (Eigen::Index i = 0; i < fem.c_lumped.size(); ++i) lumped.insert(i, i) = fem.c_lumped[i];
  SparseMatrix q = (k2 * k2) * lumped + (2.0 * k2) * fem.g + fem.g_cinv_g;
  q.makeCompressed();
  return q;
}

}  // namespace

SparsePrecision matern_precision(const FemMatrices& fem, const MaternParams& params) {
  require_alpha_two(params);
  const double tau = params.tau();
  SparseMatrix q = unit_tau_precision(fem, params.kappa());
  const double s = tau * tau;
  for (Eigen::Index k = 0; k < q.nonZeros(); ++k) q.valuePtr()[k] = s * q.valuePtr()[k];
  return q;
}

SparsePrecision nonstationary_precision(const FemMatrices& fem, const Vector& theta_tau,
                                        const Matrix& tau_basis, const MaternParams& params) {
  require_alpha_two(params);
  const Eigen::Index n = fem.c_lumped.size();
  if (tau_basis.rows() != n) {
    throw InvalidArgument("nonstationary_precision: basis has " + std::to_string(tau_basis.rows()) +
                          " rows, mesh has " + std::to_string(n) + " vertices");
  }
  if (tau_basis.cols() != theta_tau.size()) {
    throw InvalidArgument("nonstationary_precision: basis/coefficient size mismatch");
  }
  Vector tau(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    double log_tau = params.log_tau;
    for (Eigen::Index k = 0; k < theta_tau.size(); ++k) log_tau += tau_basis(v, k) * theta_tau[k];
    tau[v] = std::exp(log_tau);
  }
  SparseMatrix q = unit_tau_precision(fem, params.kappa());
  for (int col = 0; col < q.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(q, col); it; ++it) {
      it.valueRef() = (tau[it.row()] * tau[it.col()]) * it.value();
    }
  }
  return q;
}

double matern_correlation(double h, double kappa, double nu) {
  if (!(h >= 0) || !(kappa > 0) || !(nu > 0)) {
    throw InvalidArgument("matern_correlation: need h >= 0, kappa > 0, nu > 0");
  }
  const double x = kappa * h;
  if (x < 1e-6) return 1.0;
  const double log_c = nu * std::log(x) + std::log(std::cyl_bessel_k(nu, x)) - std::lgamma(nu) -
                       (nu - 1.0) * std::numbers::ln2;
  return std::exp(log_c);
}

double marginal_sigma(const MaternParams& params) {
  const double nu = params.nu;
  const double half_d = 0.5 * params.d;
  const double log_var = std::lgamma(nu) - std::lgamma(nu + half_d) -
                         half_d * std::log(4.0 * std::numbers::pi) -
                         2.0 * nu * params.log_kappa - 2.0 * params.log_tau;
  return std::exp(0.5 * log_var);
}

MaternParams params_from_sigma_rho(double sigma, double rho, double nu, int d) {
  if (!(sigma > 0) || !(rho > 0)) {
    throw InvalidArgument("params_from_sigma_rho: sigma and rho must be positive");
  }
  if (!(nu > 0.5)) throw InvalidArgument("params_from_sigma_rho: requires nu > 1/2");
  if (d < 1) throw InvalidArgument("params_from_sigma_rho: dimension must be positive");
  MaternParams p;
  p.nu = nu;
  p.d = d;
  const double alpha = nu + 0.5 * d;
  p.log_kappa = 0.5 * std::log(8.0 * nu) - std::log(rho);
  p.log_tau = 0.5 * (std::lgamma(nu) - std::lgamma(alpha) -
                     0.5 * d * std::log(4.0 * std::numbers::pi)) -
              std::log(sigma) - nu * p.log_kappa;
  return p;
}

SigmaRho sigma_rho_from_params(const MaternParams& params) {
  return {marginal_sigma(params), practical_range(params.kappa(), params.nu)};
}

double practical_range(double kappa, double nu) { return std::sqrt(8.0 * nu) / kappa; }

}  // namespace stsm
