#pragma once

#include "stsm/mesh.hpp"
#include "stsm/sparse.hpp"

namespace stsm {

/// Matérn parameters on the SPDE scale. alpha = nu + d/2 always.
struct MaternParams {
  double log_tau = 0.0;
  double log_kappa = 0.0;
  double nu = 1.0;
  int d = 2;

  double alpha() const { return nu + 0.5 * d; }
  double tau() const;
  double kappa() const;
};

/// Piecewise-linear finite element matrices on a triangulation.
struct FemMatrices {
  SparseMatrix c;          // consistent mass
  Vector c_lumped;         // row sums of c
  SparseMatrix g;          // stiffness
  SparseMatrix g_cinv_g;   // G * diag(c_lumped)^{-1} * G, cached for alpha = 2
};

FemMatrices assemble_fem(const TriangulatedMesh& mesh);

/// Q = tau^2 (kappa^4 C~ + 2 kappa^2 G + G C~^{-1} G) with C~ the lumped mass.
/// Only alpha = 2 is supported.
SparsePrecision matern_precision(const FemMatrices& fem, const MaternParams& params);

/// Non-stationary variant: log tau(v) = log_tau + sum_k basis(v, k) * theta(k),
/// Q = T Q0 T with T = diag(tau(v)) and Q0 the precision at tau = 1.
SparsePrecision nonstationary_precision(const FemMatrices& fem, const Vector& theta_tau,
                                        const Matrix& tau_basis, const MaternParams& params);

/// Matérn correlation (Gamma(nu) 2^{nu-1})^{-1} (kappa h)^nu K_nu(kappa h).
double matern_correlation(double h, double kappa, double nu);

/// Marginal standard deviation implied by (tau, kappa, nu, d).
double marginal_sigma(const MaternParams& params);

/// Range/sigma reparameterisation; inverse of sigma_rho_from_params.
MaternParams params_from_sigma_rho(double sigma, double rho, double nu = 1.0, int d = 2);

struct SigmaRho {
  double sigma = 0.0;
  double rho = 0.0;
};
SigmaRho sigma_rho_from_params(const MaternParams& params);

/// sqrt(8 nu) / kappa: distance at which the correlation drops to about 0.13.
double practical_range(double kappa, double nu);

}  // namespace stsm
