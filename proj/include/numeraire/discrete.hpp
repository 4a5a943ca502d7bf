#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "numeraire/errors.hpp"
#include "numeraire/linalg.hpp"
#include "numeraire/rng.hpp"

namespace numeraire {

// ---------------------------------------------------------------------------
// One-period market with a jump: S_1 - S_0 = eps * eta, eta = +-1 with
// P[eta = 1] = p, eps = sum_j 2^-j eps_j. Index n knows eps_1..eps_n, so
// eps | F^n_0 ~ N(mu_n, 4^-n / 3); the limit knows eps.
// ---------------------------------------------------------------------------

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 1
};

/// Gauss-Hermite rule for the standard normal law (Golub-Welsch).
inline Quadrature gauss_hermite(int n) {
  if (n < 1) throw QuadratureUnderResolved("Gauss-Hermite rule needs at least one node");
  Matrix j = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(j);
  Quadrature q;
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    q.nodes.push_back(eig.eigenvalues()(k));
    const double v = eig.eigenvectors()(0, k);
    q.weights.push_back(v * v);
    total += v * v;
  }
  for (double& w : q.weights) w /= total;
  return q;
}

struct QuadratureSpec {
  int nodes = 201;
  double range_sd = 8.0;
};

struct OnePeriodMarket {
  double p = 0.5;
  std::optional<int> n;          // nullopt is the limit market
  QuadratureSpec quadrature;
  double conditional_mean = 0.0;  // mu_n for finite n
  double eps_value = 1.0;         // eps as seen by the limit market

  void validate() const {
    if (!(p > 0.0 && p < 1.0)) throw InvalidSpec("p must lie in (0, 1)");
    if (n && *n < 1) throw InvalidSpec("signal truncation n must be positive");
    if (!std::isfinite(conditional_mean) || !std::isfinite(eps_value)) throw InvalidSpec("market values must be finite");
  }
  double conditional_sd() const { return n ? std::sqrt(std::pow(4.0, -*n) / 3.0) : 0.0; }
};

struct WealthOutcome {
  double value = 0.0;
  double probability = 0.0;
};

struct OnePeriodResult {
  double theta = 0.0;
  double theta_min = 0.0;  // admissible interval under the quadrature
  double theta_max = 0.0;
  bool at_boundary = false;
  double expected_log = 0.0;
  // Terminal wealth law. For finite n it is the quadrature law (two atoms per
  // node); for the limit, the two atoms 1 +- theta eps.
  std::vector<WealthOutcome> wealth;
};

namespace detail {

inline Quadrature truncated_rule(const QuadratureSpec& spec) {
  if (spec.nodes < 3 || !(spec.range_sd > 0.0)) {
    throw QuadratureUnderResolved("quadrature needs at least 3 nodes and a positive range");
  }
  const Quadrature full = gauss_hermite(spec.nodes);
  Quadrature q;
  double total = 0.0;
  for (std::size_t k = 0; k < full.nodes.size(); ++k) {
    if (std::abs(full.nodes[k]) <= spec.range_sd) {
      q.nodes.push_back(full.nodes[k]);
      q.weights.push_back(full.weights[k]);
      total += full.weights[k];
    }
  }
  if (q.nodes.size() < 3 || !(total > 0.0)) {
    throw QuadratureUnderResolved("fewer than 3 quadrature nodes inside the range");
  }
  for (double& w : q.weights) w /= total;
  return q;
}

}  // namespace detail

/// argmax_theta E[log(1 + theta (S_1 - S_0))] for the given market.
inline OnePeriodResult one_period_optimal(const OnePeriodMarket& mk) {
  mk.validate();
  OnePeriodResult r;
  const double p = mk.p;
  if (!mk.n) {
    // Conditional binomial: theta eps = 2p - 1.
    const double e = mk.eps_value;
    if (e == 0.0) {
      r.theta = 0.0;
      r.theta_min = -std::numeric_limits<double>::infinity();
      r.theta_max = std::numeric_limits<double>::infinity();
    } else {
      r.theta = (2.0 * p - 1.0) / e;
      r.theta_min = -1.0 / std::abs(e);
      r.theta_max = 1.0 / std::abs(e);
    }
    const double up = 1.0 + r.theta * e;
    const double down = 1.0 - r.theta * e;
    r.wealth = {{up, p}, {down, 1.0 - p}};
    r.expected_log = p * std::log(up) + (1.0 - p) * std::log(down);
    return r;
  }

  const Quadrature q = detail::truncated_rule(mk.quadrature);
  const double mu = mk.conditional_mean;
  const double sd = mk.conditional_sd();
  std::vector<double> x(q.nodes.size());
  double reach = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] = mu + sd * q.nodes[k];
    reach = std::max(reach, std::abs(x[k]));
  }
  if (!(reach > 0.0)) throw QuadratureUnderResolved("quadrature support collapsed to zero");
  // Wealth 1 +- theta x must stay above 1e-10 at every node.
  const double bound = (1.0 - 1e-10) / reach;
  r.theta_min = -bound;
  r.theta_max = bound;

  auto value = [&](double th) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      s += q.weights[k] * (p * std::log1p(th * x[k]) + (1.0 - p) * std::log1p(-th * x[k]));
    }
    return s;
  };
  auto slope = [&](double th) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      s += q.weights[k] * x[k] * (p / (1.0 + th * x[k]) - (1.0 - p) / (1.0 - th * x[k]));
    }
    return s;
  };
  auto curvature = [&](double th) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double a = 1.0 + th * x[k];
      const double b = 1.0 - th * x[k];
      s -= q.weights[k] * x[k] * x[k] * (p / (a * a) + (1.0 - p) / (b * b));
    }
    return s;
  };

  // Concave objective: root of the derivative, or the boundary it points to.
  double lo = r.theta_min;
  double hi = r.theta_max;
  if (slope(hi) >= 0.0) {
    r.theta = hi;
    r.at_boundary = true;
  } else if (slope(lo) <= 0.0) {
    r.theta = lo;
    r.at_boundary = true;
  } else {
    double th = std::clamp(0.0, lo, hi);
    for (int it = 0; it < 200; ++it) {
      const double g = slope(th);
      if (g == 0.0) break;
      if (g > 0.0) lo = th;
      else hi = th;
      const double h = curvature(th);
      double next = h < 0.0 ? th - g / h : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - th) <= 1e-15 * std::max(1.0, std::abs(th)) || hi - lo <= 1e-300) {
        th = next;
        break;
      }
      th = next;
    }
    r.theta = th;
  }
  r.expected_log = value(r.theta);
  for (std::size_t k = 0; k < x.size(); ++k) {
    r.wealth.push_back({1.0 + r.theta * x[k], q.weights[k] * p});
    r.wealth.push_back({1.0 - r.theta * x[k], q.weights[k] * (1.0 - p)});
  }
  return r;
}

struct DiscontinuityRow {
  int n = 0;
  double theta = 0.0;
  double gap = 0.0;              // max over eta of |Xhat^n_1 - Xhat^inf_1| at eps = mu_n
  double natural_lower = 0.0;    // natural constraint interval under the quadrature
  double natural_upper = 0.0;
};

struct DiscontinuityReport {
  double p = 0.5;
  double limit_gap = 0.0;  // |2p - 1|
  std::vector<DiscontinuityRow> rows;
  // Without truncation the conditional support is the real line, so the
  // natural constraints of every finite index are {0}; the limit market's
  // are [-1/|eps|, 1/|eps|].
  double limit_natural_lower = 0.0;
  double limit_natural_upper = 0.0;
};

inline DiscontinuityReport discontinuity_report(double p, const std::vector<int>& ns, const QuadratureSpec& quad = {},
                                                double conditional_mean = 0.0, double eps_value = 1.0) {
  DiscontinuityReport rep;
  rep.p = p;
  rep.limit_gap = std::abs(2.0 * p - 1.0);
  OnePeriodMarket lim{p, std::nullopt, quad, conditional_mean, eps_value};
  const OnePeriodResult r_inf = one_period_optimal(lim);
  rep.limit_natural_lower = r_inf.theta_min;
  rep.limit_natural_upper = r_inf.theta_max;
  for (int n : ns) {
    OnePeriodMarket mk{p, n, quad, conditional_mean, eps_value};
    const OnePeriodResult r = one_period_optimal(mk);
    DiscontinuityRow row;
    row.n = n;
    row.theta = r.theta;
    // Xhat^n_1 = 1 + theta eps eta against Xhat^inf_1 = 1 + (2p - 1) eta.
    row.gap = std::abs(r.theta * conditional_mean - (2.0 * p - 1.0));
    row.natural_lower = r.theta_min;
    row.natural_upper = r.theta_max;
    rep.rows.push_back(row);
  }
  return rep;
}

/// theta* of index n as the quadrature range grows.
inline std::vector<double> range_trend(OnePeriodMarket mk, const std::vector<double>& ranges) {
  std::vector<double> out;
  for (double r : ranges) {
    mk.quadrature.range_sd = r;
    out.push_back(one_period_optimal(mk).theta);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite scenario tree. Leaves are digit strings of length `depth` in base
// `branching`, ordered lexicographically. Process values chi[leaf][t] live
// on levels t = 1..depth. At level t the index-n agent knows the first
// min(depth, t - 1 + n) digits; the limit agent knows every digit.
// ---------------------------------------------------------------------------

struct ScenarioTree {
  int depth = 1;
  int branching = 2;
  std::vector<double> leaf_probability;  // empty = uniform
  std::vector<double> clock;             // dG per level; empty = 1/depth each

  std::size_t leaves() const {
    std::size_t n = 1;
    for (int t = 0; t < depth; ++t) n *= static_cast<std::size_t>(branching);
    return n;
  }
  double probability(std::size_t leaf) const {
    return leaf_probability.empty() ? 1.0 / static_cast<double>(leaves()) : leaf_probability[leaf];
  }
  double dG(int level) const {
    return clock.empty() ? 1.0 / depth : clock[static_cast<std::size_t>(level - 1)];
  }
  int digit(std::size_t leaf, int level) const {
    std::size_t block = 1;
    for (int t = level; t < depth; ++t) block *= static_cast<std::size_t>(branching);
    return static_cast<int>((leaf / block) % static_cast<std::size_t>(branching));
  }

  void validate() const {
    if (depth < 1 || depth > 24) throw InvalidSpec("tree depth must lie in [1, 24]");
    if (branching < 2) throw InvalidSpec("tree branching must be at least 2");
    if (std::pow(static_cast<double>(branching), depth) > 1e7) throw InvalidSpec("tree has too many leaves");
    if (!leaf_probability.empty()) {
      if (leaf_probability.size() != leaves()) throw InvalidSpec("leaf probabilities must cover every leaf");
      double s = 0.0;
      for (double q : leaf_probability) {
        if (!(q > 0.0)) throw InvalidSpec("leaf probabilities must be positive");
        s += q;
      }
      if (std::abs(s - 1.0) > 1e-12) throw InvalidSpec("leaf probabilities must sum to 1");
    }
    if (!clock.empty()) {
      if (clock.size() != static_cast<std::size_t>(depth)) throw InvalidSpec("clock must have one increment per level");
      for (double g : clock) {
        if (!(g >= 0.0)) throw InvalidSpec("clock increments must be nonnegative");
      }
    }
  }
};

// chi[leaf] is a row of length depth (level t at column t - 1).
using TreeProcess = Matrix;

/// Exact conditional expectation of chi at each level given the index-n
/// partition; nullopt is the limit (chi itself).
inline TreeProcess tree_predictable_projection(const ScenarioTree& tree, const TreeProcess& chi,
                                               std::optional<int> n) {
  tree.validate();
  const std::size_t L = tree.leaves();
  if (static_cast<std::size_t>(chi.rows()) != L || chi.cols() != tree.depth) {
    throw DimensionMismatch("tree process must be leaves x depth");
  }
  if (n && *n < 0) throw InvalidSpec("lookahead must be nonnegative");
  if (!n) return chi;
  TreeProcess out(chi.rows(), chi.cols());
  for (int t = 1; t <= tree.depth; ++t) {
    const int known = std::min(tree.depth, t - 1 + *n);
    std::size_t block = 1;  // leaves sharing the first `known` digits
    for (int j = known; j < tree.depth; ++j) block *= static_cast<std::size_t>(tree.branching);
    for (std::size_t start = 0; start < L; start += block) {
      double mass = 0.0;
      double s = 0.0;
      for (std::size_t leaf = start; leaf < start + block; ++leaf) {
        const double q = tree.probability(leaf);
        mass += q;
        s += q * chi(static_cast<Eigen::Index>(leaf), t - 1);
      }
      const double v = s / mass;
      for (std::size_t leaf = start; leaf < start + block; ++leaf) out(static_cast<Eigen::Index>(leaf), t - 1) = v;
    }
  }
  return out;
}

struct TreeConvergence {
  std::vector<int> ladder;
  std::vector<double> expected;      // E sum_t |chi^(n)_t - chi_t| dG_t
  Matrix per_scenario;               // leaves x ladder
  double total_clock = 0.0;
};

inline bool is_binary(const TreeProcess& chi) {
  return ((chi.array() == 0.0) || (chi.array() == 1.0)).all();
}

/// Distances of the index-n projections to the limit along a lookahead
/// ladder. With assert_monotone, a non-monotone ladder raises
/// NonNestedPartitions, as does a {0,1}-valued chi whose expected distance
/// increases (which cannot happen for nested partitions).
inline TreeConvergence tree_projection_convergence(const ScenarioTree& tree, const TreeProcess& chi,
                                                   const std::vector<int>& ladder, bool assert_monotone = true) {
  tree.validate();
  if (ladder.empty()) throw InvalidSpec("lookahead ladder is empty");
  if (assert_monotone) {
    for (std::size_t i = 1; i < ladder.size(); ++i) {
      if (ladder[i] < ladder[i - 1]) throw NonNestedPartitions("lookahead ladder must be nondecreasing");
    }
  }
  TreeConvergence out;
  out.ladder = ladder;
  const std::size_t L = tree.leaves();
  out.per_scenario.resize(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(ladder.size()));
  for (int t = 1; t <= tree.depth; ++t) out.total_clock += tree.dG(t);
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const TreeProcess proj = tree_predictable_projection(tree, chi, ladder[i]);
    double e = 0.0;
    for (std::size_t leaf = 0; leaf < L; ++leaf) {
      double s = 0.0;
      for (int t = 1; t <= tree.depth; ++t) {
        s += std::abs(proj(static_cast<Eigen::Index>(leaf), t - 1) - chi(static_cast<Eigen::Index>(leaf), t - 1)) *
             tree.dG(t);
      }
      out.per_scenario(static_cast<Eigen::Index>(leaf), static_cast<Eigen::Index>(i)) = s;
      e += tree.probability(leaf) * s;
    }
    out.expected.push_back(e);
  }
  if (assert_monotone && is_binary(chi)) {
    for (std::size_t i = 1; i < out.expected.size(); ++i) {
      if (out.expected[i] > out.expected[i - 1] + 1e-12) {
        throw NonNestedPartitions("expected projection distance increased along the ladder");
      }
    }
  }
  return out;
}

/// E sum_t |chi_t| dG_t.
inline double tree_l1(const ScenarioTree& tree, const TreeProcess& chi) {
  double e = 0.0;
  for (std::size_t leaf = 0; leaf < tree.leaves(); ++leaf) {
    double s = 0.0;
    for (int t = 1; t <= tree.depth; ++t) s += std::abs(chi(static_cast<Eigen::Index>(leaf), t - 1)) * tree.dG(t);
    e += tree.probability(leaf) * s;
  }
  return e;
}

/// {0,1}-valued process with independent fair entries drawn from `seed`.
inline TreeProcess random_binary_process(const ScenarioTree& tree, std::uint64_t seed) {
  auto eng = path_engine(seed, 0);
  TreeProcess chi(static_cast<Eigen::Index>(tree.leaves()), tree.depth);
  for (Eigen::Index i = 0; i < chi.rows(); ++i)
    for (Eigen::Index t = 0; t < chi.cols(); ++t) chi(i, t) = static_cast<double>(eng() >> 63);
  return chi;
}

/// chi_t = 1 on `leaf` at every level.
inline TreeProcess leaf_indicator_process(const ScenarioTree& tree, std::size_t leaf) {
  if (leaf >= tree.leaves()) throw InvalidSpec("leaf index out of range");
  TreeProcess chi = TreeProcess::Zero(static_cast<Eigen::Index>(tree.leaves()), tree.depth);
  chi.row(static_cast<Eigen::Index>(leaf)).setOnes();
  return chi;
}

}  // namespace numeraire
