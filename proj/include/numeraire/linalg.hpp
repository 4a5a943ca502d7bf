#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "numeraire/errors.hpp"

namespace numeraire {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw DimensionMismatch(std::string(what) + ": dimension " + std::to_string(a) +
                            " vs " + std::to_string(b));
  }
}

/// Symmetric nonnegative-definite d x d matrix with its eigendecomposition
/// cached at construction.
///
/// Construction validates symmetry (within 1e-12 relative to the largest
/// entry) and nonnegativity (all eigenvalues >= -1e-12 times the largest
/// eigenvalue); the stored entries are the exact symmetrization. When the
/// matrix is flagged clock-normalized its trace must equal one within 1e-10.
class PsdMatrix {
 public:
  explicit PsdMatrix(Matrix entries, bool clock_normalized = false)
      : entries_(std::move(entries)), clock_normalized_(clock_normalized) {
    if (entries_.rows() == 0 || entries_.rows() != entries_.cols()) {
      throw InvalidSpec("PsdMatrix: matrix must be square and nonempty");
    }
    if (!entries_.allFinite()) throw InvalidSpec("PsdMatrix: non-finite entry");
    const double scale = std::max(1.0, entries_.cwiseAbs().maxCoeff());
    if ((entries_ - entries_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw InvalidSpec("PsdMatrix: matrix is not symmetric");
    }
    entries_ = 0.5 * (entries_ + entries_.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(entries_);
    eigenvalues_ = eig.eigenvalues();
    eigenvectors_ = eig.eigenvectors();
    const double top = std::max(0.0, eigenvalues_.maxCoeff());
    if (eigenvalues_.minCoeff() < -1e-12 * std::max(top, 1e-300)) {
      if (!(top == 0.0 && eigenvalues_.minCoeff() > -1e-300)) {
        throw InvalidSpec("PsdMatrix: matrix has a negative eigenvalue");
      }
    }
    if (clock_normalized_ && std::abs(entries_.trace() - 1.0) > 1e-10) {
      throw InvalidSpec("PsdMatrix: clock-normalized matrix must have unit trace");
    }
  }

  /// Rescales a nonzero PSD matrix to unit trace.
  static PsdMatrix clock_normalized(const Matrix& entries) {
    const double tr = entries.trace();
    if (!(tr > 0.0)) throw InvalidSpec("PsdMatrix: cannot normalize a zero-trace matrix");
    return PsdMatrix(entries / tr, true);
  }

  static PsdMatrix identity(Eigen::Index d) { return PsdMatrix(Matrix::Identity(d, d)); }

  const Matrix& entries() const { return entries_; }
  Eigen::Index dim() const { return entries_.rows(); }
  bool is_clock_normalized() const { return clock_normalized_; }
  double trace() const { return entries_.trace(); }
  // Ascending.
  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }
  double largest_eigenvalue() const { return std::max(0.0, eigenvalues_.maxCoeff()); }

  Matrix sqrt() const {
    Vector root = eigenvalues_.cwiseMax(0.0).cwiseSqrt();
    return eigenvectors_ * root.asDiagonal() * eigenvectors_.transpose();
  }

  Vector apply(const Vector& x) const {
    require_same_dim(x.size(), dim(), "PsdMatrix::apply");
    return entries_ * x;
  }

 private:
  Matrix entries_;
  bool clock_normalized_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
};

/// Orthonormal bases for N = ker(c) and its complement.
struct NullspaceDecomposition {
  Matrix null_basis;   // d x k
  Matrix range_basis;  // d x (d - k)
  double eigenvalue_threshold = 0.0;
  // Smallest eigenvalue kept in the range; zero when the range is trivial.
  double smallest_range_eigenvalue = 0.0;

  Eigen::Index dim() const { return null_basis.rows(); }
  bool trivial_nullspace() const { return null_basis.cols() == 0; }

  Vector project_range(const Vector& x) const {
    if (null_basis.cols() == 0) return x;
    if (range_basis.cols() == 0) return Vector::Zero(x.size());
    // Subtract the null component; with a small nullspace this is cheaper.
    if (null_basis.cols() <= range_basis.cols()) {
      return x - null_basis * (null_basis.transpose() * x);
    }
    return range_basis * (range_basis.transpose() * x);
  }

  Vector project_null(const Vector& x) const {
    if (null_basis.cols() == 0) return Vector::Zero(x.size());
    return null_basis * (null_basis.transpose() * x);
  }
};

/// <x, c y>.
inline double pseudo_inner(const PsdMatrix& c, const Vector& x, const Vector& y) {
  require_same_dim(x.size(), c.dim(), "pseudo_inner(x)");
  require_same_dim(y.size(), c.dim(), "pseudo_inner(y)");
  return x.dot(c.entries() * y);
}

inline double pseudo_norm(const PsdMatrix& c, const Vector& x) {
  return std::sqrt(std::max(0.0, pseudo_inner(c, x, x)));
}

/// Splits R^d into ker(c) and its orthogonal complement using the relative
/// eigenvalue cutoff 1e-12 * trace(c) (cutoff 1 for the zero matrix).
inline NullspaceDecomposition nullspace(const PsdMatrix& c) {
  const Eigen::Index d = c.dim();
  const double tr = c.trace();
  NullspaceDecomposition out;
  out.eigenvalue_threshold = tr > 0.0 ? 1e-12 * tr : 1.0;
  const Vector& ev = c.eigenvalues();
  Eigen::Index k = 0;
  while (k < d && ev(k) <= out.eigenvalue_threshold) ++k;
  out.null_basis = c.eigenvectors().leftCols(k);
  out.range_basis = c.eigenvectors().rightCols(d - k);
  out.smallest_range_eigenvalue = k < d ? ev(k) : 0.0;
  return out;
}

}  // namespace numeraire
