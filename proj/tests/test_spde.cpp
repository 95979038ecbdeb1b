#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "stsm/errors.hpp"
#include "stsm/mesh.hpp"
#include "stsm/spde.hpp"

using namespace stsm;

namespace {

// Structured right-triangle mesh of [0, w] x [0, w] with n cells per side.
TriangulatedMesh square_mesh(int n, double w) {
  TriangulatedMesh m;
  const double h = w / n;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) m.vertices.push_back({i * h, j * h});
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

TriangulatedMesh unit_triangle() {
  TriangulatedMesh m;
  m.vertices = {{0, 0}, {1, 0}, {0, 1}};
  m.triangles = {{0, 1, 2}};
  m.inner_flag = {true, true, true};
  return m;
}

}  // namespace

TEST(Fem, LocalMassMatrixOfUnitTriangle) {
  const FemMatrices f = assemble_fem(unit_triangle());
  const double area = 0.5;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(f.c.coeff(i, j), i == j ? area / 6 : area / 12, 1e-15);
  }
  EXPECT_NEAR(f.c_lumped.sum(), area, 1e-15);
}

TEST(Fem, StiffnessAnnihilatesConstants) {
  const FemMatrices f = assemble_fem(square_mesh(6, 3.0));
  const Vector r = f.g * Vector::Ones(f.g.rows());
  EXPECT_LT(r.cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((Matrix(f.g) - Matrix(f.g).transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Fem, GradientEnergyOfLinearFunction) {
  const double w = 2.5;
  const TriangulatedMesh m = square_mesh(8, w);
  const FemMatrices f = assemble_fem(m);
  Vector x(static_cast<Eigen::Index>(m.n_vertices()));
  for (std::size_t v = 0; v < m.n_vertices(); ++v) x[static_cast<Eigen::Index>(v)] = m.vertices[v].x;
  // integral of |grad u1|^2 over the square is its area
  EXPECT_NEAR(x.dot(f.g * x), w * w, 1e-8);
}

TEST(Fem, RejectsZeroAreaTriangle) {
  TriangulatedMesh m;
  m.vertices = {{0, 0}, {1, 0}, {2, 0}};
  m.triangles = {{0, 1, 2}};
  m.inner_flag = {true, true, true};
  EXPECT_THROW(assemble_fem(m), DataError);
}

TEST(Matern, PrecisionMatchesDenseThreeTermFormula) {
  TriangulatedMesh m;
  m.vertices = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  m.triangles = {{0, 1, 3}, {0, 3, 2}};
  m.inner_flag = {true, true, true, true};
  const FemMatrices f = assemble_fem(m);
  MaternParams p;
  p.log_tau = 0.3;
  p.log_kappa = -0.2;
  const Matrix q(matern_precision(f, p));
  const Matrix c = f.c_lumped.asDiagonal();
  const Matrix g(f.g);
  const double t = std::exp(p.log_tau), k = std::exp(p.log_kappa);
  const Matrix expect = t * t * (std::pow(k, 4) * c + 2 * k * k * g + g * c.inverse() * g);
  EXPECT_LT((q - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Matern, LargeKappaApproachesScaledLumpedMass) {
  const FemMatrices f = assemble_fem(square_mesh(4, 1.0));
  MaternParams p;
  p.log_kappa = std::log(1e3);
  const Matrix q(matern_precision(f, p));
  const Matrix lim = std::pow(1e3, 4) * Matrix(f.c_lumped.asDiagonal());
  EXPECT_LT((q - lim).cwiseAbs().maxCoeff() / lim.cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Matern, TauScalingFactorsOut) {
  const FemMatrices f = assemble_fem(square_mesh(5, 2.0));
  MaternParams a;
  a.log_tau = -0.4;
  a.log_kappa = 0.7;
  MaternParams b = a;
  b.log_tau += 0.9;
  const Matrix qa(matern_precision(f, a));
  const Matrix qb(matern_precision(f, b));
  EXPECT_LT((qb - std::exp(2 * 0.9) * qa).cwiseAbs().maxCoeff(), 1e-12 * qb.cwiseAbs().maxCoeff());
}

TEST(Matern, PositiveDefiniteOverParameterBox) {
  // Below log kappa = -7 on a mesh of unit scale the kappa^4 term drops under
  // the rounding level of G C~^{-1} G and the factorization is no longer
  // numerically reliable.
  const FemMatrices f = assemble_fem(square_mesh(5, 2.0));
  for (double lt : {-10.0, -3.0, 0.0, 4.0, 10.0}) {
    for (double lk : {-7.0, -2.0, 0.0, 3.0, 10.0}) {
      MaternParams p;
      p.log_tau = lt;
      p.log_kappa = lk;
      SparseCholesky chol;
      EXPECT_TRUE(chol.factorize(matern_precision(f, p))) << lt << " " << lk << " pivot " << chol.smallest_pivot();
    }
  }
}

TEST(Matern, RejectsOtherSmoothness) {
  const FemMatrices f = assemble_fem(unit_triangle());
  MaternParams p;
  p.nu = 0.5;
  EXPECT_THROW(matern_precision(f, p), InvalidArgument);
}

TEST(Matern, CorrelationContinuityAndExponentialCase) {
  EXPECT_DOUBLE_EQ(matern_correlation(0.0, 1.3, 1.0), 1.0);
  for (double h : {0.1, 1.0, 5.0}) EXPECT_NEAR(matern_correlation(h, 0.8, 0.5), std::exp(-0.8 * h), 1e-10);
}

TEST(Matern, CorrelationAtPracticalRange) {
  const double kappa = 0.7;
  const double rho = practical_range(kappa, 1.0);
  EXPECT_NEAR(rho, std::sqrt(8.0) / kappa, 1e-14);
  EXPECT_NEAR(matern_correlation(rho, kappa, 1.0), 0.13, 0.01);
}

TEST(Matern, CorrelationStrictlyDecreasing) {
  double prev = 1.0;
  for (int i = 1; i <= 400; ++i) {
    const double c = matern_correlation(0.025 * i, 1.1, 1.0);
    EXPECT_LT(c, prev);
    prev = c;
  }
}

TEST(Matern, MarginalSigma) {
  MaternParams p;
  EXPECT_NEAR(marginal_sigma(p), 1.0 / std::sqrt(4 * std::numbers::pi), 1e-12);
  MaternParams q = p;
  q.log_tau = std::log(2.0);
  EXPECT_NEAR(marginal_sigma(q), 0.5 * marginal_sigma(p), 1e-15);
}

TEST(Matern, SigmaRhoParameterisation) {
  const MaternParams p = params_from_sigma_rho(1.0, 1.0);
  EXPECT_NEAR(p.log_kappa, std::log(8.0) / 2, 1e-14);
  // tau is fixed by the marginal variance identity with kappa = sqrt(8)/rho
  EXPECT_NEAR(marginal_sigma(p), 1.0, 1e-12);
  const MaternParams q = params_from_sigma_rho(1.0, 2.0);
  EXPECT_NEAR(q.log_kappa - p.log_kappa, -std::log(2.0), 1e-14);
  for (double s : {0.3, 1.0, 4.0}) {
    for (double r : {0.2, 1.0, 7.5}) {
      const SigmaRho back = sigma_rho_from_params(params_from_sigma_rho(s, r));
      EXPECT_NEAR(back.sigma, s, 1e-12 * s);
      EXPECT_NEAR(back.rho, r, 1e-12 * r);
    }
  }
  EXPECT_THROW(params_from_sigma_rho(-1.0, 1.0), InvalidArgument);
  EXPECT_THROW(params_from_sigma_rho(1.0, 0.0), InvalidArgument);
}

TEST(Matern, FemCorrelationMatchesAnalytic) {
  // fine strip from the origin out to 2 rho inside a coarse extension
  const double rho = 1.0;
  std::vector<Point2D> pts;
  for (int i = 0; i <= 20; ++i) pts.push_back({0.1 * i * rho, 0.0});
  pts.push_back({rho, 0.2 * rho});
  pts.push_back({rho, -0.2 * rho});
  MeshOptions o;
  o.max_edge_inner = rho / 5;
  o.max_edge_outer = rho;
  o.extension_margin = 3 * rho;
  const TriangulatedMesh m = build_mesh(pts, o);
  ASSERT_LE(m.n_vertices(), 500u);
  const FemMatrices f = assemble_fem(m);
  const MaternParams p = params_from_sigma_rho(1.0, rho);
  SparseCholesky chol;
  ASSERT_TRUE(chol.factorize(matern_precision(f, p)));
  const auto n = static_cast<Eigen::Index>(m.n_vertices());
  const Matrix cov = chol.solve(Matrix(Matrix::Identity(n, n)));
  double worst = 0.0;
  int compared = 0;
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto& q = m.vertices[static_cast<std::size_t>(v)];
    const double h = std::hypot(q.x, q.y);
    if (h < 0.2 * rho || h > 2 * rho || !m.inner_flag[static_cast<std::size_t>(v)]) continue;
    const double emp = cov(0, v) / std::sqrt(cov(0, 0) * cov(v, v));
    worst = std::max(worst, std::abs(emp - matern_correlation(h, p.kappa(), 1.0)));
    ++compared;
  }
  EXPECT_GT(compared, 20);
  EXPECT_LT(worst, 0.03);
}

TEST(Nonstationary, ZeroCoefficientsEqualStationary) {
  const FemMatrices f = assemble_fem(square_mesh(5, 2.0));
  MaternParams p;
  p.log_tau = 0.4;
  p.log_kappa = -0.3;
  Matrix basis(f.c.rows(), 2);
  for (Eigen::Index v = 0; v < basis.rows(); ++v) {
    basis(v, 0) = std::sin(0.3 * static_cast<double>(v));
    basis(v, 1) = static_cast<double>(v % 7);
  }
  const Matrix qs(matern_precision(f, p));
  const Matrix qn(nonstationary_precision(f, Vector::Zero(2), basis, p));
  EXPECT_LT((qs - qn).cwiseAbs().maxCoeff(), 1e-14 * qs.cwiseAbs().maxCoeff());
}

TEST(Nonstationary, ConstantColumnShiftsLogTau) {
  const FemMatrices f = assemble_fem(square_mesh(4, 2.0));
  MaternParams p;
  p.log_tau = 0.1;
  const Matrix ones = Matrix::Ones(f.c.rows(), 1);
  Vector c(1);
  c << 0.35;
  MaternParams shifted = p;
  shifted.log_tau += 0.35;
  const Matrix qa(nonstationary_precision(f, c, ones, p));
  const Matrix qb(matern_precision(f, shifted));
  EXPECT_LT((qa - qb).cwiseAbs().maxCoeff(), 1e-12 * qb.cwiseAbs().maxCoeff());
}

TEST(Nonstationary, AltitudeLikeBasisStaysPositiveDefinite) {
  const TriangulatedMesh m = square_mesh(6, 3.0);
  const FemMatrices f = assemble_fem(m);
  Matrix basis(static_cast<Eigen::Index>(m.n_vertices()), 1);
  for (std::size_t v = 0; v < m.n_vertices(); ++v) {
    basis(static_cast<Eigen::Index>(v), 0) = 200.0 * m.vertices[v].x + 50.0 * m.vertices[v].y;
  }
  for (double th : {-0.01, 0.0, 0.01}) {
    SparseCholesky chol;
    EXPECT_TRUE(chol.factorize(nonstationary_precision(f, Vector::Constant(1, th), basis, MaternParams{})));
  }
  EXPECT_THROW(nonstationary_precision(f, Vector::Zero(2), basis, MaternParams{}), InvalidArgument);
}
