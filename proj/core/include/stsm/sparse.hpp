#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace stsm {

/// Symmetric sparse matrix; both triangles are stored.
using SparseMatrix = Eigen::SparseMatrix<double>;
using SparsePrecision = SparseMatrix;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Block-diagonal concatenation.
SparseMatrix block_diagonal(const std::vector<SparseMatrix>& blocks);

/// Coordinate text dump: one `row col value` line per stored entry.
std::string to_coordinate_text(const SparseMatrix& m);

/// Sparse LL' factorization with AMD ordering plus the extras a GMRF needs:
/// log-determinant, solves, sampling and selected inversion.
class SparseCholesky {
 public:
  using Ordering = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;

  SparseCholesky() = default;

  /// Fill-reducing ordering of a symmetric pattern (both triangles stored).
  /// Matrices sharing the pattern can reuse it.
  static std::shared_ptr<const Ordering> ordering_for(const SparseMatrix& q);

  /// Returns false when the matrix is not numerically positive definite.
  /// Without an ordering one is computed for q.
  bool factorize(const SparseMatrix& q, std::shared_ptr<const Ordering> ordering = nullptr);

  bool ok() const { return ok_; }
  /// Smallest diagonal of L (squared) of the last attempt; diagnostic only.
  double smallest_pivot() const { return smallest_pivot_; }
  Eigen::Index size() const { return n_; }

  double log_determinant() const;
  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  /// x = P' L^{-T} z : a draw from N(0, Q^{-1}) given z ~ N(0, I).
  Vector sample_from_standard_normal(const Vector& z) const;

  /// Entries of Q^{-1} on the sparsity pattern of L + L' (Takahashi
  /// recursions), returned in the original ordering as a symmetric matrix.
  SparseMatrix selected_inverse() const;
  /// Diagonal of Q^{-1} in the original ordering.
  Vector inverse_diagonal() const;

 private:
  using Factor = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;
  // shared so that results holding a factorization stay copyable
  std::shared_ptr<Factor> llt_;
  // pinv_ maps a permuted index to its original index
  std::shared_ptr<const Ordering> pinv_;
  const Factor& factor() const;
  std::vector<double> takahashi() const;
  bool ok_ = false;
  double smallest_pivot_ = 0.0;
  Eigen::Index n_ = 0;
};

}  // namespace stsm
