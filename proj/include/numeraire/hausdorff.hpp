#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <numbers>
#include <vector>

#include "numeraire/constraint_set.hpp"
#include "numeraire/errors.hpp"
#include "numeraire/linalg.hpp"

namespace numeraire {

struct HausdorffOptions {
  // Directions in the base net. In 2d these are equally spaced angles; in
  // higher dimension a Halton-based sphere net plus the {-1,0,1}^d patterns.
  int net_size = 4096;
  // The best few net directions are locally refined; refinement only ever
  // adds evaluations, so the result stays a lower bound.
  int refine_top = 4;
  int refine_iterations = 40;
  // Return as soon as the lower bound reaches this value.
  double stop_at = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0;
  double r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

inline constexpr std::uint64_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

}  // namespace detail

/// Unit directions (columns) covering the sphere in R^d.
inline Matrix direction_net(Eigen::Index d, int size) {
  if (d < 1) throw InputError("direction_net: dimension must be positive");
  if (d == 1) {
    Matrix out(1, 2);
    out << 1.0, -1.0;
    return out;
  }
  if (d == 2) {
    Matrix out(2, size);
    for (int k = 0; k < size; ++k) {
      const double a = 2.0 * std::numbers::pi * k / size;
      out(0, k) = std::cos(a);
      out(1, k) = std::sin(a);
    }
    return out;
  }
  if (d > 20) throw InputError("direction_net: dimension above 20 is not supported");
  std::vector<Vector> dirs;
  // Lattice patterns catch the facet and vertex normals of boxes and orthants.
  if (d <= 6) {
    const int total = static_cast<int>(std::pow(3, d));
    for (int code = 0; code < total; ++code) {
      Vector v(d);
      int c = code;
      for (Eigen::Index i = 0; i < d; ++i) {
        v(i) = static_cast<double>(c % 3) - 1.0;
        c /= 3;
      }
      if (v.squaredNorm() > 0.0) dirs.emplace_back(v.normalized());
    }
  } else {
    for (Eigen::Index i = 0; i < d; ++i) {
      dirs.emplace_back(Vector::Unit(d, i));
      dirs.emplace_back(-Vector::Unit(d, i));
    }
  }
  // Gaussian directions from Halton points through Box-Muller.
  const Eigen::Index pairs = (d + 1) / 2;
  for (int k = 1; static_cast<int>(dirs.size()) < size; ++k) {
    Vector g(d);
    for (Eigen::Index p = 0; p < pairs; ++p) {
      const double u1 = std::max(detail::halton(static_cast<std::uint64_t>(k), detail::kPrimes[2 * p]), 1e-300);
      const double u2 = detail::halton(static_cast<std::uint64_t>(k), detail::kPrimes[2 * p + 1]);
      const double rad = std::sqrt(-2.0 * std::log(u1));
      g(2 * p) = rad * std::cos(2.0 * std::numbers::pi * u2);
      if (2 * p + 1 < d) g(2 * p + 1) = rad * std::sin(2.0 * std::numbers::pi * u2);
    }
    if (g.norm() > 1e-12) dirs.emplace_back(g.normalized());
  }
  Matrix out(d, static_cast<Eigen::Index>(dirs.size()));
  for (size_t k = 0; k < dirs.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = dirs[k];
  return out;
}

/// Shared read-only copy of direction_net(d, size).
inline std::shared_ptr<const Matrix> cached_direction_net(Eigen::Index d, int size) {
  static std::mutex mu;
  static std::map<std::pair<Eigen::Index, int>, std::shared_ptr<const Matrix>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{d, size}];
  if (!slot) slot = std::make_shared<const Matrix>(direction_net(d, size));
  return slot;
}

/// Hausdorff distance between K1 ∩ B(m) and K2 ∩ B(m), computed as the sup
/// over unit directions of the difference of support functions. The value
/// is a lower bound that converges to the true distance as the net refines.
inline double hausdorff_distance(const CompiledSet& k1, const CompiledSet& k2, double m,
                                 const HausdorffOptions& opts = {}) {
  if (!(m > 0.0)) throw InputError("hausdorff_distance: truncation must be positive");
  require_same_dim(k1.dim(), k2.dim(), "hausdorff_distance");
  const Eigen::Index d = k1.dim();
  auto gap = [&](const Vector& u) { return std::abs(k1.support(u, m) - k2.support(u, m)); };

  const auto net_ptr = cached_direction_net(d, opts.net_size);
  const Matrix& net = *net_ptr;
  std::vector<std::pair<double, Eigen::Index>> scored;
  scored.reserve(static_cast<size_t>(net.cols()));
  double best = 0.0;
  for (Eigen::Index j = 0; j < net.cols(); ++j) {
    scored.emplace_back(gap(net.col(j)), j);
    best = std::max(best, scored.back().first);
    if (best >= opts.stop_at) return best;
  }
  if (d == 1 || opts.refine_top <= 0) return best;

  const int top = std::min<int>(opts.refine_top, static_cast<int>(scored.size()));
  std::partial_sort(scored.begin(), scored.begin() + top, scored.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });
  if (d == 2) {
    const double h = 2.0 * std::numbers::pi / opts.net_size;
    for (int r = 0; r < top; ++r) {
      const Vector u0 = net.col(scored[static_cast<size_t>(r)].second);
      const double a0 = std::atan2(u0(1), u0(0));
      auto at = [&](double a) {
        Vector u(2);
        u << std::cos(a), std::sin(a);
        return gap(u);
      };
      // Golden-section on [a0 - h, a0 + h].
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      double lo = a0 - h;
      double hi = a0 + h;
      double x1 = hi - g * (hi - lo);
      double x2 = lo + g * (hi - lo);
      double f1 = at(x1);
      double f2 = at(x2);
      for (int it = 0; it < opts.refine_iterations; ++it) {
        best = std::max({best, f1, f2});
        if (f1 > f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - g * (hi - lo);
          f1 = at(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + g * (hi - lo);
          f2 = at(x2);
        }
      }
      best = std::max({best, f1, f2});
    }
    return best;
  }
  // Higher dimension: compass search on the sphere.
  for (int r = 0; r < top; ++r) {
    Vector u = net.col(scored[static_cast<size_t>(r)].second);
    double fu = scored[static_cast<size_t>(r)].first;
    double step = 0.5;
    for (int it = 0; it < opts.refine_iterations && step > 1e-7; ++it) {
      bool improved = false;
      for (Eigen::Index i = 0; i < d && !improved; ++i) {
        for (double s : {step, -step}) {
          Vector v = u;
          v(i) += s;
          v.normalize();
          const double fv = gap(v);
          if (fv > fu) {
            u = v;
            fu = fv;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    best = std::max(best, fu);
  }
  return best;
}

inline double hausdorff_distance(const ConstraintSet& k1, const ConstraintSet& k2, double m, Eigen::Index d,
                                 const HausdorffOptions& opts = {}) {
  return hausdorff_distance(k1.compile(d), k2.compile(d), m, opts);
}

/// Distances dist(K^n ∩ B(m), K^∞ ∩ B(m)); rows follow `truncations`,
/// columns follow `sequence`.
inline Matrix c_lim_check(const std::vector<ConstraintSet>& sequence, const ConstraintSet& limit,
                          const std::vector<double>& truncations, Eigen::Index d,
                          const HausdorffOptions& opts = {}) {
  if (sequence.empty()) throw InputError("c_lim_check: empty sequence");
  const CompiledSet lim = limit.compile(d);
  std::vector<CompiledSet> seq;
  seq.reserve(sequence.size());
  for (const auto& k : sequence) seq.push_back(k.compile(d));
  Matrix table(static_cast<Eigen::Index>(truncations.size()), static_cast<Eigen::Index>(sequence.size()));
  for (size_t i = 0; i < truncations.size(); ++i) {
    for (size_t n = 0; n < seq.size(); ++n) {
      table(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) =
          hausdorff_distance(seq[n], lim, truncations[i], opts);
    }
  }
  return table;
}

}  // namespace numeraire
