#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "numeraire/errors.hpp"
#include "numeraire/linalg.hpp"
#include "numeraire/polyhedral_projection.hpp"

namespace numeraire {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class ConstraintSet;

struct FullSpace {};

struct Ball {
  double radius = 1.0;
};

// Coordinate bounds; +-infinity entries are allowed.
struct Box {
  Vector lower;
  Vector upper;
};

// {x : <normal, x> <= offset}
struct Halfspace {
  Vector normal;
  double offset = 0.0;
};

struct Polytope {
  std::vector<Halfspace> halfspaces;
};

struct NonnegativeOrthant {};

struct Intersection {
  std::vector<ConstraintSet> sets;
};

class CompiledSet;

/// Closed convex set containing the origin, as a tagged union of the
/// supported shapes. Balls, the orthant and the full space are
/// dimension-free; boxes and polytopes fix the dimension.
class ConstraintSet {
 public:
  using Variant = std::variant<FullSpace, Ball, Box, Polytope, NonnegativeOrthant, Intersection>;

  ConstraintSet() : v_(FullSpace{}) {}
  ConstraintSet(Variant v) : v_(std::move(v)) {}  // NOLINT(google-explicit-constructor)

  static ConstraintSet full_space() { return ConstraintSet(FullSpace{}); }
  static ConstraintSet ball(double radius) { return ConstraintSet(Ball{radius}); }
  static ConstraintSet box(Vector lower, Vector upper) {
    return ConstraintSet(Box{std::move(lower), std::move(upper)});
  }
  static ConstraintSet polytope(std::vector<Halfspace> hs) { return ConstraintSet(Polytope{std::move(hs)}); }
  static ConstraintSet orthant() { return ConstraintSet(NonnegativeOrthant{}); }
  static ConstraintSet intersection(std::vector<ConstraintSet> sets) {
    return ConstraintSet(Intersection{std::move(sets)});
  }

  const Variant& variant() const { return v_; }

  std::string kind() const {
    return std::visit(
        [](const auto& s) -> std::string {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, FullSpace>) return "full";
          if constexpr (std::is_same_v<T, Ball>) return "ball";
          if constexpr (std::is_same_v<T, Box>) return "box";
          if constexpr (std::is_same_v<T, Polytope>) return "polytope";
          if constexpr (std::is_same_v<T, NonnegativeOrthant>) return "orthant";
          if constexpr (std::is_same_v<T, Intersection>) return "intersection";
        },
        v_);
  }

  /// Dimension fixed by the set, if any (boxes, polytopes, and intersections
  /// containing one).
  std::optional<Eigen::Index> intrinsic_dim() const {
    return std::visit(
        [](const auto& s) -> std::optional<Eigen::Index> {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Box>) return s.lower.size();
          if constexpr (std::is_same_v<T, Polytope>) {
            if (s.halfspaces.empty()) return std::nullopt;
            return s.halfspaces.front().normal.size();
          }
          if constexpr (std::is_same_v<T, Intersection>) {
            for (const auto& k : s.sets) {
              if (auto d = k.intrinsic_dim()) return d;
            }
            return std::nullopt;
          }
          return std::nullopt;
        },
        v_);
  }

  /// Checks the set is well formed in dimension d and contains the origin.
  void validate(Eigen::Index d) const {
    std::visit(
        [d](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Ball>) {
            if (!(s.radius >= 0.0) || std::isnan(s.radius)) {
              throw InvalidConstraint("ball radius must be nonnegative");
            }
          } else if constexpr (std::is_same_v<T, Box>) {
            if (s.lower.size() != d || s.upper.size() != d) {
              throw DimensionMismatch("box bounds must have dimension " + std::to_string(d));
            }
            for (Eigen::Index i = 0; i < d; ++i) {
              if (std::isnan(s.lower(i)) || std::isnan(s.upper(i))) throw InvalidConstraint("box bound is NaN");
              if (s.lower(i) > 0.0 || s.upper(i) < 0.0) {
                throw InvalidConstraint("box must contain the origin");
              }
            }
          } else if constexpr (std::is_same_v<T, Polytope>) {
            for (const auto& h : s.halfspaces) {
              if (h.normal.size() != d) {
                throw DimensionMismatch("halfspace normal must have dimension " + std::to_string(d));
              }
              if (!h.normal.allFinite() || !(h.normal.norm() > 0.0)) {
                throw InvalidConstraint("halfspace normal must be finite and nonzero");
              }
              if (!(h.offset >= 0.0)) throw InvalidConstraint("polytope must contain the origin");
            }
          } else if constexpr (std::is_same_v<T, Intersection>) {
            if (s.sets.empty()) throw InvalidConstraint("intersection of no sets");
            for (const auto& k : s.sets) k.validate(d);
          }
        },
        v_);
  }

  CompiledSet compile(Eigen::Index d) const;

  bool contains(const Vector& x, double tol = 1e-8) const;
  Vector project(const Vector& x) const;
  /// Support function of the set intersected with the centered ball B(m).
  double support(const Vector& u, double truncation) const;

 private:
  Variant v_;
};

/// Canonical form of a ConstraintSet in a fixed dimension:
/// {lower <= x <= upper, A x <= b, |x| <= radius}.
class CompiledSet {
 public:
  CompiledSet(Eigen::Index d, const ConstraintSet& k) : d_(d), lower_(Vector::Constant(d, -kInf)), upper_(Vector::Constant(d, kInf)) {
    k.validate(d);
    std::vector<Halfspace> hs;
    absorb(k, hs);
    Matrix rows(static_cast<Eigen::Index>(hs.size()), d);
    Vector offsets(static_cast<Eigen::Index>(hs.size()));
    for (size_t i = 0; i < hs.size(); ++i) {
      rows.row(static_cast<Eigen::Index>(i)) = hs[i].normal.transpose();
      offsets(static_cast<Eigen::Index>(i)) = hs[i].offset;
    }
    has_halfspaces_ = !hs.empty();
    if (has_halfspaces_) {
      // Finite coordinate bounds join the halfspace rows for the QP.
      std::vector<Halfspace> all = hs;
      for (Eigen::Index i = 0; i < d; ++i) {
        if (std::isfinite(upper_(i))) all.push_back({Vector::Unit(d, i), upper_(i)});
        if (std::isfinite(lower_(i))) all.push_back({-Vector::Unit(d, i), -lower_(i)});
      }
      Matrix a(static_cast<Eigen::Index>(all.size()), d);
      Vector b(static_cast<Eigen::Index>(all.size()));
      for (size_t i = 0; i < all.size(); ++i) {
        a.row(static_cast<Eigen::Index>(i)) = all[i].normal.transpose();
        b(static_cast<Eigen::Index>(i)) = all[i].offset;
      }
      projector_ = detail::PolyhedronProjector(std::move(a), std::move(b));
    }
    halfspace_rows_ = std::move(rows);
    halfspace_offsets_ = std::move(offsets);
    unbounded_box_ = (lower_.array() == -kInf).all() && (upper_.array() == kInf).all();
  }

  Eigen::Index dim() const { return d_; }
  double radius() const { return radius_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const Matrix& halfspace_normals() const { return halfspace_rows_; }
  const Vector& halfspace_offsets() const { return halfspace_offsets_; }
  bool is_full_space() const { return unbounded_box_ && !has_halfspaces_ && radius_ == kInf; }
  bool is_polyhedral() const { return radius_ == kInf; }

  bool contains(const Vector& x, double tol = 1e-8) const {
    require_same_dim(x.size(), d_, "CompiledSet::contains");
    if ((x.array() < lower_.array() - tol).any() || (x.array() > upper_.array() + tol).any()) return false;
    if (has_halfspaces_ && ((halfspace_rows_ * x - halfspace_offsets_).array() > tol).any()) return false;
    if (radius_ < kInf && x.norm() > radius_ + tol) return false;
    return true;
  }

  /// Projection onto the polyhedral part (bounds and halfspaces).
  Vector project_polyhedral(const Vector& y, detail::PolyhedronProjector::WarmStart* warm = nullptr) const {
    if (!has_halfspaces_) return y.cwiseMax(lower_).cwiseMin(upper_);
    return projector_.project(y, warm);
  }

  Vector project(const Vector& y) const {
    require_same_dim(y.size(), d_, "CompiledSet::project");
    if (radius_ == kInf) return project_polyhedral(y);
    if (unbounded_box_ && !has_halfspaces_) {
      const double n = y.norm();
      return n <= radius_ ? y : Vector(y * (radius_ / n));
    }
    detail::PolyhedronProjector::WarmStart warm;
    Vector p = project_polyhedral(y, &warm);
    if (p.norm() <= radius_) return p;
    // min |x - y|^2 + mu |x|^2 over the polyhedron is solved by projecting
    // y / (1 + mu); |proj(s y)| is nondecreasing in s, so bisect on s.
    double lo = 0.0;
    double hi = 1.0;
    Vector best = Vector::Zero(d_);
    for (int it = 0; it < 80 && hi - lo > 1e-16; ++it) {
      const double mid = 0.5 * (lo + hi);
      Vector q = project_polyhedral(mid * y, &warm);
      if (q.norm() <= radius_) {
        lo = mid;
        best = std::move(q);
      } else {
        hi = mid;
      }
    }
    return best;
  }

  /// max <u, x> over the set intersected with B(truncation).
  double support(const Vector& u, double truncation) const {
    require_same_dim(u.size(), d_, "CompiledSet::support");
    const double r = std::min(radius_, truncation);
    const double un = u.norm();
    if (un == 0.0) return 0.0;
    if (r == kInf) {
      throw InputError("support function of an unbounded set requires a finite truncation");
    }
    if (r == 0.0) return 0.0;
    if (unbounded_box_ && !has_halfspaces_) return r * un;
    if (!has_halfspaces_) return box_support(u, r);
    detail::PolyhedronProjector::WarmStart warm;
    // x(t) = proj_P(t u) maximizes <u,x> - |x|^2/(2t); |x(t)| is nondecreasing
    // in t and the truncated support is <u, x(t*)> with |x(t*)| = r.
    double t_lo = 0.0;
    Vector x_lo = Vector::Zero(d_);
    double t_hi = r / un;
    Vector x_hi = project_polyhedral(t_hi * u, &warm);
    const double t_cap = 1e13 * r / un;
    while (x_hi.norm() < r) {
      t_lo = t_hi;
      x_lo = x_hi;
      if (t_hi >= t_cap) return u.dot(x_lo);
      t_hi *= 4.0;
      x_hi = project_polyhedral(t_hi * u, &warm);
    }
    for (int it = 0; it < 200; ++it) {
      if (t_hi - t_lo <= 1e-15 * t_hi || u.dot(x_hi - x_lo) <= 1e-15 * r * un) break;
      const double m = t_lo == 0.0 ? 0.5 * t_hi : std::sqrt(t_lo * t_hi);
      Vector x = project_polyhedral(m * u, &warm);
      if (x.norm() <= r) {
        t_lo = m;
        x_lo = std::move(x);
      } else {
        t_hi = m;
        x_hi = std::move(x);
      }
    }
    // x_lo is feasible; the value is accurate to |u| * |x_hi - x_lo|.
    return u.dot(x_lo);
  }

 private:
  // Box cap ball: x(t) = clamp(t u) and |x(t)|^2 is piecewise quadratic in t
  // with breakpoints where coordinates hit their bounds.
  double box_support(const Vector& u, double r) const {
    std::vector<std::pair<double, Eigen::Index>> breaks;
    double free_sq = 0.0;  // sum of u_i^2 over coordinates still moving
    for (Eigen::Index i = 0; i < d_; ++i) {
      if (u(i) == 0.0) continue;
      free_sq += u(i) * u(i);
      const double bound = u(i) > 0.0 ? upper_(i) : lower_(i);
      if (std::isfinite(bound)) breaks.emplace_back(bound / u(i), i);
    }
    std::sort(breaks.begin(), breaks.end());
    double clamped_sq = 0.0;  // sum of bound_i^2 over clamped coordinates
    double t = 0.0;
    auto point = [&](double s) {
      Vector x = (s * u).cwiseMax(lower_).cwiseMin(upper_);
      return u.dot(x);
    };
    for (const auto& [tb, i] : breaks) {
      const double norm_sq = tb * tb * free_sq + clamped_sq;
      if (norm_sq >= r * r) break;
      t = tb;
      free_sq -= u(i) * u(i);
      const double b = u(i) > 0.0 ? upper_(i) : lower_(i);
      clamped_sq += b * b;
    }
    if (free_sq <= 0.0) return point(t);  // every moving coordinate clamped inside the ball
    const double ts = std::sqrt(std::max(0.0, r * r - clamped_sq) / free_sq);
    return point(std::max(t, ts));
  }

  void absorb(const ConstraintSet& k, std::vector<Halfspace>& hs) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Ball>) {
            radius_ = std::min(radius_, s.radius);
          } else if constexpr (std::is_same_v<T, Box>) {
            lower_ = lower_.cwiseMax(s.lower);
            upper_ = upper_.cwiseMin(s.upper);
          } else if constexpr (std::is_same_v<T, Polytope>) {
            for (const auto& h : s.halfspaces) hs.push_back(h);
          } else if constexpr (std::is_same_v<T, NonnegativeOrthant>) {
            lower_ = lower_.cwiseMax(Vector::Zero(d_));
          } else if constexpr (std::is_same_v<T, Intersection>) {
            for (const auto& sub : s.sets) absorb(sub, hs);
          }
        },
        k.variant());
  }

  Eigen::Index d_;
  Vector lower_;
  Vector upper_;
  double radius_ = kInf;
  bool has_halfspaces_ = false;
  bool unbounded_box_ = true;
  Matrix halfspace_rows_;
  Vector halfspace_offsets_;
  detail::PolyhedronProjector projector_;
};

inline CompiledSet ConstraintSet::compile(Eigen::Index d) const { return CompiledSet(d, *this); }

inline bool ConstraintSet::contains(const Vector& x, double tol) const { return compile(x.size()).contains(x, tol); }

inline Vector ConstraintSet::project(const Vector& x) const { return compile(x.size()).project(x); }

inline double ConstraintSet::support(const Vector& u, double truncation) const {
  return compile(u.size()).support(u, truncation);
}

}  // namespace numeraire
