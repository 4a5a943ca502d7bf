#pragma once

#include <cmath>
#include <string>

#include "numeraire/constraint_set.hpp"
#include "numeraire/errors.hpp"
#include "numeraire/linalg.hpp"

namespace numeraire {

struct DriftVector {
  Vector alpha;

  DriftVector() = default;
  explicit DriftVector(Vector a) : alpha(std::move(a)) {
    if (!alpha.allFinite()) throw InvalidSpec("drift vector has non-finite entries");
  }
};

struct PortfolioFraction {
  Vector phi;
  int iterations = 0;
  // Norm of the projected-gradient map at phi.
  double residual = 0.0;
};

struct SolverOptions {
  int max_iterations = 100000;
  double fixed_point_tol = 1e-10;
  double residual_tol = 1e-8;
  int dykstra_max_iterations = 10000;
  // Reject inputs where ker(c) is not inside K. Off only for callers that
  // want the restricted problem over K ∩ N⊥ regardless.
  bool require_nullspace_in_constraint = true;
};

/// Projection onto K ∩ range(c) by Dykstra alternation between the
/// Euclidean projection onto K and the orthogonal projection onto N⊥.
inline Vector project_onto(const CompiledSet& k, const NullspaceDecomposition& ns, const Vector& x,
                           int max_iterations = 10000) {
  require_same_dim(x.size(), k.dim(), "project_onto");
  if (ns.trivial_nullspace()) return k.project(x);
  if (ns.range_basis.cols() == 0) return Vector::Zero(x.size());
  Vector cur = x;
  Vector p = Vector::Zero(x.size());
  Vector q = Vector::Zero(x.size());
  const double scale = 1.0 + x.norm();
  for (int it = 0; it < max_iterations; ++it) {
    Vector u = k.project(cur + p);
    p = cur + p - u;
    Vector next = ns.project_range(u + q);
    q = u + q - next;
    const double change = (next - cur).norm();
    cur = std::move(next);
    if (change <= 1e-15 * scale && (u - cur).norm() <= 1e-12 * scale) return cur;
  }
  if (k.contains(cur, 1e-8) && ns.project_null(cur).norm() <= 1e-8) return cur;
  throw NonConvergence("project_onto: Dykstra iteration cap reached");
}

inline Vector project_onto(const ConstraintSet& k, const NullspaceDecomposition& ns, const Vector& x,
                           int max_iterations = 10000) {
  return project_onto(k.compile(x.size()), ns, x, max_iterations);
}

/// Rejects constraint sets that do not contain ker(c): each null direction,
/// scaled both ways, must be a fixed point of the projection onto K.
inline void check_nullspace_contained(const CompiledSet& k, const NullspaceDecomposition& ns) {
  constexpr double kProbe = 1e3;
  for (Eigen::Index j = 0; j < ns.null_basis.cols(); ++j) {
    for (double sign : {1.0, -1.0}) {
      Vector v = sign * kProbe * ns.null_basis.col(j);
      if ((k.project(v) - v).norm() > 1e-8 * kProbe) {
        throw NullspaceNotContained("constraint set does not contain the nullspace of the covariance");
      }
    }
  }
}

/// Maximizer of <f, alpha>_c - |f|_c^2 / 2 over K ∩ N⊥ for a fixed (c, K),
/// reusable across drift vectors.
class PhiSolver {
 public:
  PhiSolver(const PsdMatrix& c, const ConstraintSet& k, SolverOptions opts = {})
      : c_(c), ns_(nullspace(c)), k_(k.compile(c.dim())), opts_(opts) {
    if (opts_.require_nullspace_in_constraint) check_nullspace_contained(k_, ns_);
  }

  const PsdMatrix& covariance() const { return c_; }
  const NullspaceDecomposition& decomposition() const { return ns_; }
  const CompiledSet& constraint() const { return k_; }
  const SolverOptions& options() const { return opts_; }

  Vector project(const Vector& x) const { return project_onto(k_, ns_, x, opts_.dykstra_max_iterations); }

  double objective(const Vector& f, const Vector& alpha) const {
    const Vector cf = c_.entries() * f;
    return cf.dot(alpha) - 0.5 * cf.dot(f);
  }

  /// Norm of x - P(x - grad/L), scaled by L.
  double residual(const Vector& x, const Vector& alpha) const {
    const double lip = c_.largest_eigenvalue();
    if (lip <= 0.0) return 0.0;
    const Vector grad = c_.entries() * (x - alpha);
    return lip * (x - project(x - grad / lip)).norm();
  }

  PortfolioFraction solve(const DriftVector& drift) const {
    const Vector& alpha = drift.alpha;
    require_same_dim(alpha.size(), c_.dim(), "solve_phi");
    const Eigen::Index d = alpha.size();
    PortfolioFraction out;
    if (ns_.range_basis.cols() == 0) {
      out.phi = Vector::Zero(d);
      return out;
    }
    // The unconstrained maximizer over N⊥ is the range component of alpha;
    // when it is feasible it is the answer.
    Vector unconstrained = ns_.project_range(alpha);
    if (k_.contains(unconstrained, 0.0)) {
      out.phi = std::move(unconstrained);
      return out;
    }

    const double lip = c_.largest_eigenvalue();
    const Matrix& cm = c_.entries();
    Vector x = Vector::Zero(d);
    Vector y = x;
    double t = 1.0;
    for (int it = 1; it <= opts_.max_iterations; ++it) {
      const Vector grad = cm * (y - alpha);
      Vector next = project(y - grad / lip);
      // Gradient-based adaptive restart keeps the scheme monotone enough for
      // strongly concave problems.
      if ((y - next).dot(next - x) > 0.0) {
        t = 1.0;
        y = x;
        continue;
      }
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double step = (next - x).norm();
      y = next + ((t - 1.0) / t_next) * (next - x);
      x = std::move(next);
      t = t_next;
      if (step <= opts_.fixed_point_tol) {
        const Vector g = cm * (x - alpha);
        const Vector fp = project(x - g / lip);
        if ((x - fp).norm() <= opts_.fixed_point_tol) {
          out.phi = ns_.project_range(fp);
          out.iterations = it;
          out.residual = lip * (x - fp).norm();
          return out;
        }
      }
    }
    out.phi = ns_.project_range(x);
    out.iterations = opts_.max_iterations;
    out.residual = residual(out.phi, alpha);
    if (out.residual > opts_.residual_tol) {
      throw NonConvergence("solve_phi: iteration cap reached with residual " + std::to_string(out.residual));
    }
    return out;
  }

 private:
  PsdMatrix c_;
  NullspaceDecomposition ns_;
  CompiledSet k_;
  SolverOptions opts_;
};

/// arg max over K ∩ N⊥ of <f, alpha>_c - |f|_c^2 / 2.
inline PortfolioFraction solve_phi(const PsdMatrix& c, const DriftVector& alpha, const ConstraintSet& k,
                                   const SolverOptions& opts = {}) {
  return PhiSolver(c, k, opts).solve(alpha);
}

}  // namespace numeraire
