#include "stsm/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "stsm/errors.hpp"

namespace stsm {

SparseMatrix block_diagonal(const std::vector<SparseMatrix>& blocks) {
  Eigen::Index n = 0;
  std::size_t nnz = 0;
  for (const auto& b : blocks) {
    n += b.rows();
    nnz += static_cast<std::size_t>(b.nonZeros());
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(nnz);
  Eigen::Index offset = 0;
  for (const auto& b : blocks) {
    for (int k = 0; k < b.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(b, k); it; ++it) {
        trips.emplace_back(offset + it.row(), offset + it.col(), it.value());
      }
    }
    offset += b.rows();
  }
  SparseMatrix out(n, n);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

std::string to_coordinate_text(const SparseMatrix& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  return os.str();
}

std::shared_ptr<const SparseCholesky::Ordering> SparseCholesky::ordering_for(const SparseMatrix& q) {
  if (q.rows() != q.cols()) throw InvalidArgument("SparseCholesky: matrix is not square");
  auto pinv = std::make_shared<Ordering>();
  Eigen::AMDOrdering<int> amd;
  amd(q, *pinv);
  return pinv;
}

bool SparseCholesky::factorize(const SparseMatrix& q, std::shared_ptr<const Ordering> ordering) {
  if (q.rows() != q.cols()) throw InvalidArgument("SparseCholesky: matrix is not square");
  n_ = q.rows();
  if (!ordering) ordering = ordering_for(q);
  if (ordering->size() != n_) throw InvalidArgument("SparseCholesky: ordering size mismatch");
  pinv_ = std::move(ordering);
  SparseMatrix permuted(n_, n_);
  permuted.selfadjointView<Eigen::Lower>() = q.selfadjointView<Eigen::Lower>().twistedBy(pinv_->inverse());
  llt_ = std::make_shared<Factor>();
  llt_->compute(permuted);
  ok_ = llt_->info() == Eigen::Success;
  smallest_pivot_ = std::numeric_limits<double>::quiet_NaN();
  if (ok_) {
    const SparseMatrix& l = llt_->matrixL().nestedExpression();
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < l.outerSize(); ++j) {
      // first stored entry of each column is the diagonal
      const double d = l.valuePtr()[l.outerIndexPtr()[j]];
      smallest = std::min(smallest, d * d);
      if (!(d > 0) || !std::isfinite(d)) ok_ = false;
    }
    smallest_pivot_ = smallest;
  }
  return ok_;
}

const SparseCholesky::Factor& SparseCholesky::factor() const {
  if (!llt_ || !ok_) throw NumericalError("SparseCholesky: no valid factorization");
  return *llt_;
}

double SparseCholesky::log_determinant() const {
  const SparseMatrix& l = factor().matrixL().nestedExpression();
  double s = 0.0;
  for (Eigen::Index j = 0; j < l.outerSize(); ++j) s += std::log(l.valuePtr()[l.outerIndexPtr()[j]]);
  return 2.0 * s;
}

Vector SparseCholesky::solve(const Vector& b) const {
  const Factor& f = factor();
  return *pinv_ * f.solve(Vector(pinv_->inverse() * b));
}

Matrix SparseCholesky::solve(const Matrix& b) const {
  const Factor& f = factor();
  return *pinv_ * f.solve(Matrix(pinv_->inverse() * b));
}

Vector SparseCholesky::sample_from_standard_normal(const Vector& z) const {
  Vector y = factor().matrixU().solve(z);
  return *pinv_ * y;
}

std::vector<double> SparseCholesky::takahashi() const {
  const SparseMatrix& l = factor().matrixL().nestedExpression();
  const Eigen::Index n = l.cols();
  const int* outer = l.outerIndexPtr();
  const int* inner = l.innerIndexPtr();
  const double* val = l.valuePtr();
  // sigma shares the storage layout of L (lower triangle, column-major)
  std::vector<double> sigma(static_cast<std::size_t>(l.nonZeros()), 0.0);

  // Dense mirror of sigma for O(1) lookups when it fits comfortably; the
  // binary search over column patterns covers large problems.
  const bool dense = n <= 2500;
  Matrix mirror = dense ? Matrix::Zero(n, n) : Matrix();

  auto lookup = [&](int row, int col) -> double {
    if (row < col) std::swap(row, col);
    if (dense) return mirror(row, col);
    const int* begin = inner + outer[col];
    const int* end = inner + outer[col + 1];
    const int* it = std::lower_bound(begin, end, row);
    if (it == end || *it != row) return 0.0;  // outside the filled pattern; never needed
    return sigma[static_cast<std::size_t>(it - inner)];
  };
  auto store = [&](int p, int row, int col, double v) {
    sigma[static_cast<std::size_t>(p)] = v;
    if (dense) mirror(row, col) = v;
  };

  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const int start = outer[i];
    const int stop = outer[i + 1];
    const double lii = val[start];
    const auto ii = static_cast<int>(i);
    // off-diagonal entries of column i, processed from the bottom up
    for (int p = stop - 1; p > start; --p) {
      const int j = inner[p];
      double acc = 0.0;
      for (int q = start + 1; q < stop; ++q) acc += val[q] * lookup(inner[q], j);
      store(p, j, ii, -acc / lii);
    }
    double acc = 0.0;
    for (int q = start + 1; q < stop; ++q) acc += val[q] * sigma[static_cast<std::size_t>(q)];
    store(start, ii, ii, 1.0 / (lii * lii) - acc / lii);
  }
  return sigma;
}

Vector SparseCholesky::inverse_diagonal() const {
  const std::vector<double> sigma = takahashi();
  const SparseMatrix& l = factor().matrixL().nestedExpression();
  const auto& pinv = pinv_->indices();
  Vector d(n_);
  for (Eigen::Index j = 0; j < n_; ++j) d[pinv[j]] = sigma[static_cast<std::size_t>(l.outerIndexPtr()[j])];
  return d;
}

SparseMatrix SparseCholesky::selected_inverse() const {
  const std::vector<double> sigma = takahashi();
  const SparseMatrix& l = factor().matrixL().nestedExpression();
  const Eigen::Index n = l.cols();
  const int* outer = l.outerIndexPtr();
  const int* inner = l.innerIndexPtr();
  // Undo the fill-reducing permutation: permuted index k holds original P^{-1}(k).
  const auto& pinv = pinv_->indices();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * sigma.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int p = outer[j]; p < outer[j + 1]; ++p) {
      const int i = inner[p];
      const int oi = pinv[i];
      const int oj = pinv[j];
      trips.emplace_back(oi, oj, sigma[static_cast<std::size_t>(p)]);
      if (oi != oj) trips.emplace_back(oj, oi, sigma[static_cast<std::size_t>(p)]);
    }
  }
  SparseMatrix out(n, n);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace stsm
