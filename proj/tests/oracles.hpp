#pragma once

// Dense brute-force counterparts of the sparse model computations, shared by
// the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "stsm/dataset.hpp"
#include "stsm/inference.hpp"
#include "stsm/mesh.hpp"
#include "stsm/model.hpp"
#include "stsm/spde.hpp"

namespace stsm::testing {

// Orthonormal basis of the null space of the constraint rows.
inline Matrix constraint_kernel(const Matrix& c, Eigen::Index n) {
  if (c.rows() == 0) return Matrix::Identity(n, n);
  Eigen::FullPivLU<Matrix> lu(c);
  const Matrix k = lu.kernel();
  Eigen::HouseholderQR<Matrix> qr(k);
  return qr.householderQ() * Matrix::Identity(n, k.cols());
}

struct DensePosterior {
  Vector mean;
  Matrix covariance;
  double log_evidence = 0.0;
};

// Integrates the latent field analytically over the constraint subspace using
// dense eigen and Cholesky decompositions.
inline DensePosterior dense_posterior(const JointGMRF& g, const HyperParams& h, const Vector& y) {
  const Matrix q(prior_precision(g.spec, h, g.fem.get(), g.periods,
                                 g.tau_basis.size() > 0 ? &g.tau_basis : nullptr));
  const Matrix a(g.design);
  const Eigen::Index n = q.rows();
  const Matrix b = constraint_kernel(g.constraints, n);
  const Matrix qu = b.transpose() * q * b;
  Eigen::SelfAdjointEigenSolver<Matrix> es(qu);
  const double tol = 1e-9 * es.eigenvalues().maxCoeff();
  double log_pdet = 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()[i] > tol) {
      log_pdet += std::log(es.eigenvalues()[i]);
      ++rank;
    }
  }
  const double tau = std::exp(h.log_prec_gauss);
  const Matrix p = qu + tau * b.transpose() * a.transpose() * a * b;
  const Vector rhs = tau * b.transpose() * a.transpose() * y;
  Eigen::LLT<Matrix> llt(p);
  const Vector mu = llt.solve(rhs);
  const double log_det_p = 2 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  const double l2p = std::log(2 * std::numbers::pi);
  const double nobs = static_cast<double>(y.size());
  DensePosterior out;
  out.mean = b * mu;
  out.covariance = b * llt.solve(Matrix::Identity(p.rows(), p.rows())) * b.transpose();
  out.log_evidence = -0.5 * nobs * l2p + 0.5 * nobs * h.log_prec_gauss - 0.5 * tau * y.squaredNorm() -
                     0.5 * rank * l2p + 0.5 * log_pdet + 0.5 * static_cast<double>(b.cols()) * l2p -
                     0.5 * log_det_p + 0.5 * rhs.dot(mu);
  return out;
}

// Structured square mesh of [0, w]^2, n cells per side.
inline TriangulatedMesh square_mesh(int n, double w) {
  TriangulatedMesh m;
  const double step = w / n;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) m.vertices.push_back({i * step, j * step});
  }
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  m.inner_flag.assign(m.vertices.size(), true);
  return m;
}

inline double st_effect(const Station& s) { return std::sin(s.location.x) + std::cos(s.location.y); }

// Small dataset of `stations` sites inside [0, w]^2 and `periods` quarters
// with a linear drift, a seasonal wave and a few missing cells.
inline Dataset small_dataset(int stations, int periods, double w, unsigned seed,
                             double missing_every = 5) {
  Dataset d;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05 * w, 0.95 * w);
  std::normal_distribution<double> n01;
  for (int s = 0; s < stations; ++s) {
    Station st;
    st.id = "S" + std::to_string(s);
    st.location = {u(rng), u(rng)};
    st.altitude = 100.0 * s;
    st.dist_sea_km = 10.0 + s;
    d.stations.push_back(st);
  }
  for (int t = 0; t < periods; ++t) d.times.push_back(Period::from_index(4 * 2000 + t));
  d.values.resize(stations, periods);
  for (int s = 0; s < stations; ++s) {
    for (int t = 0; t < periods; ++t) {
      const bool missing = missing_every > 0 && std::fmod(static_cast<double>(s * periods + t), missing_every) == 3;
      d.values(s, t) = missing ? std::nan("")
                               : 20 + 0.1 * t + std::sin(std::numbers::pi * t / 2) +
                                     0.2 * st_effect(d.stations[static_cast<std::size_t>(s)]) +
                                     0.3 * n01(rng);
    }
  }
  return d;
}

inline JointGMRF model_for(const Dataset& d, const ModelSpec& spec, const TriangulatedMesh* mesh) {
  Projector proj;
  std::shared_ptr<FemMatrices> fem;
  if (mesh != nullptr) {
    proj = barycentric_projector(*mesh, d.locations());
    fem = std::make_shared<FemMatrices>(assemble_fem(*mesh));
  }
  JointGMRF g = build_design(d, spec, proj);
  g.fem = fem;
  return g;
}

// Latent means and sds by brute-force quadrature over a two-dimensional
// hyperparameter box: rectangle rule with n x n nodes, every node evaluated
// with the dense oracle.
struct QuadratureMarginals {
  Vector mean;
  Vector sd;
};

inline QuadratureMarginals dense_quadrature(const JointGMRF& g, const PriorSet& priors,
                                            const Vector& lo, const Vector& hi, int n) {
  const HyperLayout layout(g.spec);
  std::vector<double> logw;
  std::vector<DensePosterior> comps;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Vector theta(2);
      theta << lo[0] + (hi[0] - lo[0]) * (i + 0.5) / n, lo[1] + (hi[1] - lo[1]) * (j + 0.5) / n;
      const HyperParams h = layout.unpack(theta);
      comps.push_back(dense_posterior(g, h, g.y));
      logw.push_back(comps.back().log_evidence + priors.log_density(theta));
    }
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double wsum = 0.0;
  for (double& w : logw) {
    w = std::exp(w - top);
    wsum += w;
  }
  const Eigen::Index dim = comps.front().mean.size();
  Vector m1 = Vector::Zero(dim), m2 = Vector::Zero(dim);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const double w = logw[k] / wsum;
    m1 += w * comps[k].mean;
    m2 += w * (comps[k].covariance.diagonal() + comps[k].mean.cwiseAbs2());
  }
  return {m1, (m2 - m1.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt()};
}

}  // namespace stsm::testing
