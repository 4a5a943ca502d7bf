// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance [--known-failures 1,2,...] [criterion numbers...]
//
// Every criterion runs when none are named. Criteria listed as known
// failures still print FAIL but do not change the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "numeraire/discrete.hpp"
#include "numeraire/experiment.hpp"
#include "numeraire/sensitivity.hpp"

using namespace numeraire;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string num(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", x);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path config_path(const std::string& name) { return fs::path(NUMERAIRE_CONFIG_DIR) / name; }

struct Rng {
  std::mt19937_64 eng;
  Normal g;
  explicit Rng(std::uint64_t seed) : eng(path_engine(seed, 0)) {}
  double normal() { return g(eng); }
  double uniform(double a, double b) { return a + (b - a) * static_cast<double>(eng() >> 11) * 0x1.0p-53; }
  int pick(int n) { return static_cast<int>(eng() % static_cast<std::uint64_t>(n)); }
  bool coin(double p) { return uniform(0.0, 1.0) < p; }
  Vector gaussian(Eigen::Index d) {
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = normal();
    return v;
  }
};

// ---------------------------------------------------------------------------
// Random instances for the deterministic problem.
//
// A rank-deficient c has its kernel either along coordinate axes (so boxes
// and polytopes can be made to contain it) or in a random direction (only
// sets described in the range of c contain it).
// ---------------------------------------------------------------------------

enum class Kernel { None, Axes, Rotated };

struct Instance {
  PsdMatrix c;
  Kernel kernel = Kernel::None;
  std::vector<bool> null_axis;  // Kernel::Axes
  Matrix range_projector;       // Kernel::Rotated
};

Instance random_instance(Rng& rng, Eigen::Index d, bool allow_deficient) {
  const bool deficient = allow_deficient && d > 1 && rng.coin(0.35);
  if (!deficient) {
    const Matrix g = Matrix::NullaryExpr(d, d, [&] { return rng.normal(); });
    return {PsdMatrix::clock_normalized(g * g.transpose() + 0.02 * Matrix::Identity(d, d)), Kernel::None, {}, {}};
  }
  const Eigen::Index r = 1 + rng.pick(static_cast<int>(d - 1));
  if (rng.coin(0.5)) {
    std::vector<Eigen::Index> idx(static_cast<size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) idx[static_cast<size_t>(i)] = i;
    for (Eigen::Index i = d - 1; i > 0; --i) std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.pick(static_cast<int>(i + 1)))]);
    const Matrix g = Matrix::NullaryExpr(r, r, [&] { return rng.normal(); });
    const Matrix block = g * g.transpose() + 0.02 * Matrix::Identity(r, r);
    Matrix c = Matrix::Zero(d, d);
    std::vector<bool> null_axis(static_cast<size_t>(d), true);
    for (Eigen::Index i = 0; i < r; ++i) {
      null_axis[static_cast<size_t>(idx[static_cast<size_t>(i)])] = false;
      for (Eigen::Index j = 0; j < r; ++j) c(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]) = block(i, j);
    }
    return {PsdMatrix::clock_normalized(c), Kernel::Axes, null_axis, {}};
  }
  const Matrix g = Matrix::NullaryExpr(d, r, [&] { return rng.normal(); });
  Instance in{PsdMatrix::clock_normalized(g * g.transpose()), Kernel::Rotated, {}, {}};
  const auto ns = nullspace(in.c);
  in.range_projector = ns.range_basis * ns.range_basis.transpose();
  return in;
}

ConstraintSet random_ball(Rng& rng) { return ConstraintSet::ball(rng.uniform(0.05, 2.0)); }

ConstraintSet random_box(Rng& rng, const Instance& in, Eigen::Index d) {
  Vector lo(d), hi(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const bool free = in.kernel == Kernel::Axes && in.null_axis[static_cast<size_t>(i)];
    lo(i) = free || rng.coin(0.15) ? -kInf : -rng.uniform(0.05, 2.0);
    hi(i) = free || rng.coin(0.15) ? kInf : rng.uniform(0.05, 2.0);
  }
  return ConstraintSet::box(lo, hi);
}

ConstraintSet random_polytope(Rng& rng, const Instance& in, Eigen::Index d) {
  std::vector<Halfspace> hs;
  const int k = 1 + rng.pick(4);
  while (static_cast<int>(hs.size()) < k) {
    Vector n = rng.gaussian(d);
    if (in.kernel == Kernel::Axes) {
      for (Eigen::Index i = 0; i < d; ++i)
        if (in.null_axis[static_cast<size_t>(i)]) n(i) = 0.0;
    } else if (in.kernel == Kernel::Rotated) {
      n = in.range_projector * n;
    }
    if (n.norm() < 1e-3) continue;
    hs.push_back({n / n.norm(), rng.uniform(0.05, 1.5)});
  }
  return ConstraintSet::polytope(hs);
}

ConstraintSet random_set(Rng& rng, const Instance& in, Eigen::Index d, int depth = 0) {
  std::vector<int> kinds;  // 0 full, 1 ball, 2 box, 3 polytope, 4 orthant, 5 intersection
  switch (in.kernel) {
    case Kernel::None: kinds = {0, 1, 2, 3, 4, 5}; break;
    case Kernel::Axes: kinds = {0, 2, 3, 5}; break;
    case Kernel::Rotated: kinds = {0, 3, 5}; break;
  }
  if (depth > 0) kinds.erase(std::remove(kinds.begin(), kinds.end(), 5), kinds.end());
  switch (kinds[static_cast<size_t>(rng.pick(static_cast<int>(kinds.size())))]) {
    case 0: return ConstraintSet::full_space();
    case 1: return random_ball(rng);
    case 2: return random_box(rng, in, d);
    case 3: return random_polytope(rng, in, d);
    case 4: return ConstraintSet::orthant();
    default: return ConstraintSet::intersection({random_set(rng, in, d, 1), random_set(rng, in, d, 1)});
  }
}

ConstraintSet scaled(const ConstraintSet& k, double s) {
  return std::visit(
      [s](const auto& v) -> ConstraintSet {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Ball>) return ConstraintSet::ball(v.radius * s);
        else if constexpr (std::is_same_v<T, Box>) return ConstraintSet::box(v.lower * s, v.upper * s);
        else if constexpr (std::is_same_v<T, Polytope>) {
          auto hs = v.halfspaces;
          for (auto& h : hs) h.offset *= s;
          return ConstraintSet::polytope(hs);
        } else if constexpr (std::is_same_v<T, Intersection>) {
          std::vector<ConstraintSet> parts;
          for (const auto& p : v.sets) parts.push_back(scaled(p, s));
          return ConstraintSet::intersection(parts);
        } else {
          return ConstraintSet(v);
        }
      },
      k.variant());
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  const Eigen::Index dims[] = {1, 2, 3, 5};
  const double slack = 1e-6;
  int fail1 = 0, fail2 = 0, fail3 = 0, fail3_euclid = 0, deficient = 0;
  double worst1 = -kInf, worst2 = -kInf, worst3 = -kInf;
  std::set<std::string> kinds;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Index d = dims[i % 4];
    const Instance in = random_instance(rng, d, true);
    if (in.kernel != Kernel::None) ++deficient;
    const ConstraintSet k = random_set(rng, in, d);
    const ConstraintSet k2 = rng.coin(0.5) ? scaled(k, rng.uniform(0.6, 1.4)) : random_set(rng, in, d);
    kinds.insert(k.kind());
    kinds.insert(k2.kind());
    const Vector a = rng.gaussian(d) * rng.uniform(0.2, 3.0);
    const Vector a2 = rng.coin(0.5) ? Vector(a + 0.3 * rng.gaussian(d)) : Vector(rng.gaussian(d) * 2.0);
    const auto& c = in.c;

    const PhiSolver solver(c, k), solver2(c, k2);
    const Vector phi = solver.solve(DriftVector(a)).phi;
    const Vector phi_a2 = solver.solve(DriftVector(a2)).phi;
    const Vector phi_k2 = solver2.solve(DriftVector(a)).phi;
    const double na = pseudo_norm(c, a);

    const double e1 = pseudo_norm(c, phi_a2 - phi) - pseudo_norm(c, a2 - a);
    worst1 = std::max(worst1, e1);
    if (e1 > slack) ++fail1;

    const double e2 = pseudo_norm(c, phi) - na;
    worst2 = std::max(worst2, e2);
    if (e2 > slack) ++fail2;

    const double lhs = std::pow(pseudo_norm(c, phi_k2 - phi), 2);
    if (lhs <= slack || na == 0.0) continue;
    auto excess = [&](double m) {
      HausdorffOptions o;
      o.stop_at = (lhs - slack) / (4.0 * na);
      const double dist = hausdorff_distance(solver2.constraint(), solver.constraint(), m, o);
      return lhs - 4.0 * na * dist;
    };
    const double e3 = excess(na);
    worst3 = std::max(worst3, e3);
    if (e3 > slack) {
      ++fail3;
      if (excess(std::max({phi.norm(), phi_k2.norm(), 1e-12})) > slack) ++fail3_euclid;
    }
  }
  Outcome o;
  o.pass = fail1 == 0 && fail2 == 0 && fail3 == 0;
  std::string kl;
  for (const auto& s : kinds) kl += (kl.empty() ? "" : "/") + s;
  o.detail = "1000 instances (" + std::to_string(deficient) + " rank-deficient; sets " + kl + "): violations (1) " +
             std::to_string(fail1) + ", (2) " + std::to_string(fail2) + ", (3) " + std::to_string(fail3) +
             " with the |a|_c truncation, " + std::to_string(fail3_euclid) +
             " with truncation max(|phi|,|phi'|); worst excess " + num(worst1) + ", " + num(worst2) + ", " +
             num(worst3) + "; " + num(seconds_since(t0)) + " s";
  if (seconds_since(t0) >= 60.0) o.pass = false;
  return o;
}

// Coarse-to-fine grid maximization of <x, c a> - |x|_c^2 / 2 over K.
// The last level is the lattice of spacing `resolution`.
Vector grid_argmax(const PsdMatrix& c, const Vector& a, const CompiledSet& k, double radius, double resolution) {
  const Eigen::Index d = a.size();
  const Matrix& C = c.entries();
  const Vector ca = C * a;
  auto f = [&](const Vector& x) { return x.dot(ca) - 0.5 * x.dot(C * x); };
  Vector center = Vector::Zero(d);
  double h = radius / 16.0;
  int w = 16;
  for (;;) {
    const bool last = h <= resolution;
    double best = -kInf;
    Vector arg = center;
    std::vector<int> idx(static_cast<size_t>(d), -w);
    Vector x(d);
    for (;;) {
      for (Eigen::Index i = 0; i < d; ++i) x(i) = center(i) + h * idx[static_cast<size_t>(i)];
      if (k.contains(x, 0.0)) {
        const double v = f(x);
        if (v > best) {
          best = v;
          arg = x;
        }
      }
      Eigen::Index i = 0;
      while (i < d && ++idx[static_cast<size_t>(i)] > w) idx[static_cast<size_t>(i++)] = -w;
      if (i == d) break;
    }
    center = arg;
    if (last) return center;
    const double next = std::max(h / 4.0, resolution);
    w = static_cast<int>(std::ceil(4.0 * h / next));
    if (next == resolution) center = (center / resolution).array().round().matrix() * resolution;
    h = next;
  }
}

Outcome criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(202);
  const double res = 1e-3;
  int fails = 0, beaten = 0;
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index d = 1 + i % 3;
    // Well-conditioned c keeps the grid optimum within a few cells.
    const Matrix q = Eigen::HouseholderQR<Matrix>(Matrix::NullaryExpr(d, d, [&] { return rng.normal(); })).householderQ();
    Vector ev(d);
    for (Eigen::Index j = 0; j < d; ++j) ev(j) = rng.uniform(0.3, 1.0);
    const PsdMatrix c = PsdMatrix::clock_normalized(q * ev.asDiagonal() * q.transpose());
    const Instance in{c, Kernel::None, {}, {}};
    const ConstraintSet k = random_set(rng, in, d);
    const Vector a = rng.gaussian(d) * rng.uniform(0.2, 1.5);
    const Vector phi = solve_phi(c, DriftVector(a), k).phi;
    const double lmin = c.eigenvalues().minCoeff();
    const double radius = 1.05 * pseudo_norm(c, a) / std::sqrt(lmin) + 0.01;
    const Vector g = grid_argmax(c, a, k.compile(d), radius, res);
    const double e = (phi - g).cwiseAbs().maxCoeff() / res;
    worst = std::max(worst, e);
    if (e > 2.0 + 1e-9) ++fails;
    // A lattice point strictly better than phi would mean the solver is off.
    const PhiSolver solver(c, k);
    if (solver.objective(g, a) > solver.objective(phi, a) + 1e-12) ++beaten;
  }
  Outcome o;
  const double t = seconds_since(t0);
  o.pass = fails == 0 && t < 120.0;
  o.detail = "200 instances, d <= 3: " + std::to_string(fails) + " outside 2 cells; worst " + num(worst) +
             " cells of 1e-3; lattice beats phi on " + std::to_string(beaten) + "; " + num(t) + " s";
  return o;
}

Outcome criterion_3() {
  Rng rng(303);
  const Eigen::Index dims[] = {1, 2, 3, 5};
  double worst_full = 0.0, worst_def = 0.0;
  int deficient = 0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index d = dims[i % 4];
    const Instance in = random_instance(rng, d, true);
    const Vector a = rng.gaussian(d) * rng.uniform(0.1, 5.0);
    const Vector phi = solve_phi(in.c, DriftVector(a), ConstraintSet::full_space()).phi;
    if (in.kernel == Kernel::None) {
      worst_full = std::max(worst_full, (phi - a).cwiseAbs().maxCoeff());
    } else {
      // phi is a modulo the kernel of c.
      ++deficient;
      worst_def = std::max(worst_def, (in.c.entries() * (phi - a)).cwiseAbs().maxCoeff());
    }
  }
  Outcome o;
  o.pass = worst_full <= 1e-9 && worst_def <= 1e-9;
  o.detail = "100 instances: max |phi - a| " + num(worst_full) + " (full rank), max |c(phi - a)| " + num(worst_def) +
             " (" + std::to_string(deficient) + " rank-deficient)";
  return o;
}

Outcome criterion_4() {
  Outcome o;
  OnePeriodMarket lim{0.6, std::nullopt, {}};
  const auto r = one_period_optimal(lim);
  double closed = 0.0;
  if (r.wealth.size() != 2) {
    closed = kInf;
  } else {
    closed = std::max({std::abs(r.wealth[0].value - 1.2), std::abs(r.wealth[1].value - 0.8),
                       std::abs(r.wealth[0].probability - 0.6), std::abs(r.wealth[1].probability - 0.4)});
  }
  std::vector<int> ns = {1, 2, 3, 4, 5, 6, 7, 8};
  const auto rep = discontinuity_report(0.6, ns, {201, 8.0});
  double theta_max = 0.0, gap_dev = 0.0;
  for (const auto& row : rep.rows) {
    theta_max = std::max(theta_max, std::abs(row.theta));
    gap_dev = std::max(gap_dev, std::abs(row.gap - 0.2));
  }
  // theta* shrinks as the quadrature range grows, also off the symmetric case.
  bool trend = true;
  for (int n : {1, 4, 8}) {
    OnePeriodMarket mk{0.6, n, {}};
    mk.conditional_mean = 0.1;
    const auto tr = range_trend(mk, {2.0, 4.0, 6.0, 8.0});
    for (std::size_t i = 1; i < tr.size(); ++i) trend = trend && std::abs(tr[i]) < std::abs(tr[i - 1]);
  }
  o.pass = closed <= 1e-12 && theta_max <= 1e-3 && gap_dev <= 1e-12 && trend;
  o.detail = "limit wealth 1 + 0.2 eta off by " + num(closed) + "; max |theta*_n| " + num(theta_max) +
             " at +-8 sd, n = 1..8; gap table off 0.2 by " + num(gap_dev) + "; range trend " +
             (trend ? "decreasing" : "not decreasing");
  return o;
}

Outcome criterion_5() {
  ScenarioTree tree;
  tree.depth = 6;
  tree.branching = 2;
  std::vector<int> ladder = {0, 1, 2, 3, 4, 5, 6};
  std::vector<TreeProcess> binary;
  for (std::uint64_t s = 1; s <= 8; ++s) binary.push_back(random_binary_process(tree, s));
  for (std::size_t leaf : {0u, 17u, 63u}) binary.push_back(leaf_indicator_process(tree, leaf));
  std::vector<TreeProcess> all = binary;
  Rng rng(505);
  for (int i = 0; i < 4; ++i) {
    all.push_back(TreeProcess::NullaryExpr(static_cast<Eigen::Index>(tree.leaves()), tree.depth, [&] { return rng.normal(); }));
  }

  bool monotone = true, zero = true;
  for (const auto& chi : binary) {
    const auto conv = tree_projection_convergence(tree, chi, ladder);
    for (std::size_t i = 1; i < conv.expected.size(); ++i) monotone = monotone && conv.expected[i] <= conv.expected[i - 1];
    zero = zero && conv.expected.back() == 0.0;
  }
  double contraction = -kInf, tower = 0.0;
  for (const auto& chi : all) {
    const double l1 = tree_l1(tree, chi);
    std::vector<TreeProcess> proj;
    for (int n : ladder) proj.push_back(tree_predictable_projection(tree, chi, n));
    for (std::size_t i = 0; i < proj.size(); ++i) {
      contraction = std::max(contraction, tree_l1(tree, proj[i]) - l1);
      for (std::size_t j = i; j < proj.size(); ++j) {
        const TreeProcess nested = tree_predictable_projection(tree, proj[j], ladder[i]);
        tower = std::max(tower, (nested - proj[i]).cwiseAbs().maxCoeff());
      }
    }
  }
  Outcome o;
  o.pass = monotone && zero && contraction <= 1e-12 && tower <= 1e-12;
  o.detail = "depth 6: distances " + std::string(monotone ? "nonincreasing" : "NOT nonincreasing") + ", " +
             (zero ? "zero" : "NONZERO") + " at n = depth; contraction excess " + num(contraction) +
             ", tower gap " + num(tower);
  return o;
}

Outcome criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig c = load_config(config_path("stability_filtration.json"));
  const Market m(*c.market);
  std::vector<double> expected;
  for (int n = 1; n <= 8; ++n) expected.push_back(std::ldexp(1.0, -n));
  const bool setup = c.ladder.values == expected && c.paths == 10000 && m.n_steps() == 200 && m.dim() == 2 &&
                     m.grid().horizon() == 1.0;
  const auto rep = run_filtration_ladder(m, c.ladder.values, c.paths, {c.threads, 0, c.ladder.event_threshold});
  const auto fv = rep.slope("fv_distance"), qv = rep.slope("qv_distance");
  const double first = rep.summary("sup_rel_error", 0).median;
  const double last = rep.summary("sup_rel_error", rep.size() - 1).median;
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = setup && fv.negative() && qv.negative() && last < 0.2 * first && t < 300.0;
  o.detail = "fv slope " + num(fv.slope) + " [" + num(fv.lower) + ", " + num(fv.upper) + "], qv slope " +
             num(qv.slope) + " [" + num(qv.lower) + ", " + num(qv.upper) + "]; median sup_rel_error " + num(last) +
             " vs " + num(first) + " (" + num(100 * last / first) + "%); " + num(t) + " s" +
             (setup ? "" : "; config differs from the stated ladder");
  return o;
}

Outcome criterion_7() {
  const ExperimentConfig c = load_config(config_path("stability_probability.json"));
  const Market m(*c.market);
  bool setup = true;
  for (std::size_t i = 0; i < c.ladder.values.size(); ++i) setup = setup && c.ladder.values[i] == std::ldexp(1.0, -static_cast<int>(i + 1));
  const auto rep = run_probability_ladder(m, c.ladder.values, c.paths, {c.threads, 0, c.ladder.event_threshold},
                                          c.ladder.paired_noise);
  Outcome o;
  o.pass = setup;
  for (const char* name : {"z_terminal", "z_sup", "z_qv", "r_qv", "drift_gap", "main1_fv", "main1_qv", "main2_fv", "main2_qv"}) {
    const auto s = rep.slope(name);
    o.pass = o.pass && s.negative();
    o.detail += std::string(o.detail.empty() ? "" : ", ") + name + " " + num(s.slope) + " (upper " + num(s.upper) + ")";
  }
  return o;
}

Outcome criterion_8() {
  Outcome o;
  for (const char* file : {"stability_constraint_ball.json", "stability_constraint_box.json"}) {
    const ExperimentConfig c = load_config(config_path(file));
    const Market m(*c.market);
    ConstraintLadderOptions opts;
    opts.threads = c.threads;
    opts.hausdorff.net_size = c.ladder.hausdorff_net;
    opts.clim_truncations = c.ladder.clim_truncations;
    const auto rep = run_constraint_ladder(m, c.ladder.sets, c.ladder.limit_set, c.paths, opts);
    auto total = [&](const char* name) {
      double s = 0.0;
      for (const auto& row : rep.metric(name).samples)
        for (double x : row) s += x;
      return s;
    };
    const double stated = total("bound_violations"), euclid = total("bound_violations_euclid");
    const auto slope = rep.slope("sup_rel_error");
    o.pass = o.pass && stated == 0.0 && slope.negative();
    const std::string label = std::string(file).find("ball") != std::string::npos ? "balls" : "boxes";
    o.detail += (o.detail.empty() ? "" : "; ") + label + ": violating steps " + num(stated) + " (|a|_c truncation), " +
                num(euclid) + " (truncation max(|phi|)); sup_rel_error slope " + num(slope.slope) + " (upper " +
                num(slope.upper) + ")";
  }
  return o;
}

Outcome criterion_9() {
  const ExperimentConfig c = load_config(config_path("sensitivity.json"));
  const Market m(*c.market);
  const auto& eps = c.sensitivity.eps;
  const double gap = quotient_identity_gap(m, eps, c.paths, c.threads);
  const auto first = first_order_check(m, eps, c.paths, c.threads);
  const auto second = second_order_check(m, eps, c.paths, c.threads);
  auto in_range = [](double x) { return x >= 0.8 && x <= 1.2; };

  Json flat = c.source["market"];
  flat["tilt"]["lambda"] = std::vector<double>(static_cast<size_t>(m.dim()), 0.0);
  const Market zero(market_from_json(flat));
  double zmax = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const PathBundle p = zero.simulate_path(i);
    const auto lim = expansion_limits(zero, p);
    zmax = std::max({zmax, lim.first_order_limit.total().cwiseAbs().maxCoeff(),
                     lim.second_order_limit.total().cwiseAbs().maxCoeff()});
    for (double e : eps) zmax = std::max(zmax, log_ratio_quotient(zero, p, e).direct.total().cwiseAbs().maxCoeff());
  }
  Outcome o;
  o.pass = gap <= 1e-8 && in_range(first.fv_order) && in_range(first.qv_order) && in_range(second.fv_order) &&
           in_range(second.qv_order) && zmax == 0.0;
  o.detail = "identity gap " + num(gap) + "; first-order orders " + num(first.fv_order) + "/" + num(first.qv_order) +
             ", second-order " + num(second.fv_order) + "/" + num(second.qv_order) + " (fv/qv); lambda = 0 max " +
             num(zmax);
  return o;
}

Outcome criterion_10() {
  ExperimentConfig c = load_config(config_path("simulate.json"));
  const Market m(*c.market);
  const std::size_t n = 10000;
  const PhiCache cache(m);
  const ConstraintSet& k = m.constraint(0);
  Rng rng(1010);
  // Ten constant fractions and ten feedback rules phi_t = proj_K(A log S_t + b).
  std::vector<std::function<Matrix(const PathBundle&)>> strategies;
  for (int s = 0; s < 20; ++s) {
    const Vector b = k.project(rng.gaussian(m.dim()) * rng.uniform(0.2, 2.0));
    if (s < 10) {
      strategies.push_back([b, &m](const PathBundle&) { return Matrix(b.replicate(1, m.n_steps())); });
    } else {
      const Matrix A = Matrix::NullaryExpr(m.dim(), m.dim(), [&] { return rng.normal(); });
      strategies.push_back([A, b, &m, &k](const PathBundle& p) {
        Matrix phi(m.dim(), m.n_steps());
        for (int t = 0; t < m.n_steps(); ++t) {
          const Vector x = p.S.col(t).array().log().matrix();
          phi.col(t) = k.project(A * x + b);
        }
        return phi;
      });
    }
  }
  std::vector<WealthPath> num_paths(n);
  std::vector<std::vector<WealthPath>> x(strategies.size(), std::vector<WealthPath>(n));
  const double limit = m.spec().signal.limit_noise;
  parallel_for(n, c.threads, [&](std::size_t i) {
    const PathBundle p = m.simulate_path(i);
    num_paths[i] = numeraire_path(m, p, m.filtered_drift(p, limit), cache);
    for (std::size_t s = 0; s < strategies.size(); ++s) x[s][i] = wealth_path(m, p, strategies[s](p));
  });
  Outcome o;
  double worst = -kInf;
  int fails = 0;
  for (const auto& xs : x) {
    const auto e = deflation_check(xs, num_paths);
    worst = std::max(worst, (e.mean - 1.0) / e.std_error);
    if (e.mean > 1.0 + 3.0 * e.std_error) ++fails;
  }
  o.pass = fails == 0;
  o.detail = "20 strategies, 1e4 paths: " + std::to_string(fails) + " above 1 + 3 stderr; largest (mean - 1)/stderr " +
             num(worst);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_11() {
  const fs::path root = fs::temp_directory_path() / "numeraire_acceptance_determinism";
  fs::remove_all(root);
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(NUMERAIRE_CONFIG_DIR))
    if (e.path().extension() == ".json") configs.push_back(e.path());
  std::sort(configs.begin(), configs.end());
  int compared = 0, differ = 0;
  std::string bad;
  for (const auto& file : configs) {
    std::vector<fs::path> dirs;
    for (int threads : {1, 8}) {
      ExperimentConfig c = load_config(file);
      c.threads = threads;
      c.output_dir = (root / file.stem() / std::to_string(threads)).string();
      if (c.path_cache) c.path_cache = (root / file.stem() / ("cache" + std::to_string(threads))).string();
      run(c);
      dirs.push_back(c.output_dir);
    }
    for (const auto& e : fs::directory_iterator(dirs[0])) {
      if (e.path().extension() != ".csv") continue;
      ++compared;
      if (slurp(e.path()) != slurp(dirs[1] / e.path().filename())) {
        ++differ;
        bad += " " + file.stem().string() + "/" + e.path().filename().string();
      }
    }
  }
  fs::remove_all(root);
  Outcome o;
  o.pass = differ == 0 && compared > 0;
  o.detail = std::to_string(configs.size()) + " configs, " + std::to_string(compared) + " CSVs compared at 1 vs 8 workers, " +
             std::to_string(differ) + " differ" + bad;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, Outcome (*)()>> criteria = {
      {"proposition inequalities", criterion_1}, {"grid oracle", criterion_2},
      {"unconstrained identity", criterion_3},   {"counterexample", criterion_4},
      {"tree projection", criterion_5},          {"filtration ladder", criterion_6},
      {"probability ladder", criterion_7},       {"constraint ladder", criterion_8},
      {"sensitivity", criterion_9},              {"deflation", criterion_10},
      {"determinism", criterion_11}};
  std::set<int> only, known;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--known-failures" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) known.insert(std::stoi(item));
    } else {
      only.insert(std::stoi(arg));
    }
  }
  int unexpected = 0;
  std::string failed_ids;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) {
      failed_ids += " " + std::to_string(id);
      if (!known.count(id)) ++unexpected;
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << std::endl;
  }
  std::cout << (failed_ids.empty() ? "all criteria pass" : "failing:" + failed_ids) << "; " << unexpected
            << " unexpected" << std::endl;
  return unexpected == 0 ? 0 : 1;
}
