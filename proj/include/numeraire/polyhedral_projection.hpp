#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "numeraire/errors.hpp"
#include "numeraire/linalg.hpp"

namespace numeraire::detail {

/// Euclidean projection onto {x : A x <= b} for polyhedra that contain the
/// origin (b >= 0), by a primal active-set method started at a feasible
/// point. Sizes in this library are small (d <= ~10, a few dozen rows), so
/// each working-set solve is a dense LDLT on the active rows.
class PolyhedronProjector {
 public:
  struct WarmStart {
    Vector x;
    std::vector<int> working;
  };

  PolyhedronProjector() = default;
  PolyhedronProjector(Matrix rows, Vector offsets) : a_(std::move(rows)), b_(std::move(offsets)) {
    require_same_dim(a_.rows(), b_.size(), "PolyhedronProjector");
    norms_.resize(a_.rows());
    for (Eigen::Index i = 0; i < a_.rows(); ++i) norms_(i) = a_.row(i).norm();
  }

  Eigen::Index rows() const { return a_.rows(); }
  const Matrix& normals() const { return a_; }
  const Vector& offsets() const { return b_; }

  Vector project(const Vector& y, WarmStart* warm = nullptr) const {
    const Eigen::Index d = y.size();
    const Eigen::Index m = a_.rows();
    if (m == 0) return y;
    const double scale = 1.0 + y.cwiseAbs().maxCoeff() + b_.cwiseAbs().maxCoeff();
    const double feas_tol = 1e-12 * scale;

    Vector x = Vector::Zero(d);
    std::vector<int> working;
    std::vector<char> in_work(static_cast<size_t>(m), 0);
    if (warm != nullptr && warm->x.size() == d && feasible(warm->x, feas_tol)) {
      x = warm->x;
      for (int i : warm->working) {
        if (i >= 0 && i < m && !in_work[static_cast<size_t>(i)] &&
            std::abs(a_.row(i).dot(x) - b_(i)) <= 1e-9 * scale) {
          working.push_back(i);
          in_work[static_cast<size_t>(i)] = 1;
        }
      }
      if (!independent(working)) {
        working.clear();
        std::fill(in_work.begin(), in_work.end(), 0);
      }
    }

    const int cap = 50 * static_cast<int>(m + d) + 100;
    for (int iter = 0; iter < cap; ++iter) {
      Vector g = y - x;
      Vector lambda;
      Vector p = g;
      if (!working.empty()) {
        Matrix aw(static_cast<Eigen::Index>(working.size()), d);
        for (size_t k = 0; k < working.size(); ++k) aw.row(static_cast<Eigen::Index>(k)) = a_.row(working[k]);
        Matrix gram = aw * aw.transpose();
        lambda = gram.ldlt().solve(aw * g);
        p = g - aw.transpose() * lambda;
      }
      if (p.norm() <= 1e-14 * scale) {
        if (working.empty()) return finish(x, working, warm);
        Eigen::Index worst = 0;
        const double most_negative = lambda.minCoeff(&worst);
        if (most_negative >= -1e-13 * scale) return finish(x, working, warm);
        in_work[static_cast<size_t>(working[static_cast<size_t>(worst)])] = 0;
        working.erase(working.begin() + worst);
        continue;
      }
      double step = 1.0;
      int blocking = -1;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (in_work[static_cast<size_t>(i)]) continue;
        const double ap = a_.row(i).dot(p);
        if (ap <= 1e-15 * norms_(i) * p.norm()) continue;
        const double slack = std::max(0.0, b_(i) - a_.row(i).dot(x));
        const double s = slack / ap;
        if (s < step) {
          step = s;
          blocking = static_cast<int>(i);
        }
      }
      x += step * p;
      if (blocking >= 0) {
        working.push_back(blocking);
        in_work[static_cast<size_t>(blocking)] = 1;
      }
    }
    throw NonConvergence("polyhedral projection: active-set iteration cap reached");
  }

  bool feasible(const Vector& x, double tol) const {
    if (a_.rows() == 0) return true;
    return ((a_ * x - b_).array() <= tol).all();
  }

 private:
  bool independent(const std::vector<int>& rows) const {
    if (rows.empty()) return true;
    Matrix aw(static_cast<Eigen::Index>(rows.size()), a_.cols());
    for (size_t k = 0; k < rows.size(); ++k) aw.row(static_cast<Eigen::Index>(k)) = a_.row(rows[k]);
    Eigen::FullPivLU<Matrix> lu(aw);
    return lu.rank() == aw.rows();
  }

  static Vector finish(const Vector& x, const std::vector<int>& working, WarmStart* warm) {
    if (warm != nullptr) {
      warm->x = x;
      warm->working = working;
    }
    return x;
  }

  Matrix a_;
  Vector b_;
  Vector norms_;
};

}  // namespace numeraire::detail
