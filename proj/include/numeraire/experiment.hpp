#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "numeraire/config.hpp"
#include "numeraire/discrete.hpp"
#include "numeraire/path_cache.hpp"
#include "numeraire/quadform.hpp"
#include "numeraire/sensitivity.hpp"
#include "numeraire/stability.hpp"

namespace numeraire {

inline constexpr const char* kVersion = "1.0.0";

struct Criterion {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct RunManifest {
  std::string config_hash;  // 16 hex digits
  std::string version = kVersion;
  double wall_clock_seconds = 0.0;
  std::vector<Criterion> criteria;
  std::vector<std::string> files;  // relative to the output directory

  bool all_pass() const {
    for (const auto& c : criteria)
      if (!c.pass) return false;
    return true;
  }
};

struct RunResult {
  RunManifest manifest;
  std::string message;  // short human-readable result for stdout
};

namespace detail {

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

/// Writes via a temporary file and rename so readers never see partial output.
inline void atomic_write(const std::filesystem::path& file, const std::string& content) {
  std::filesystem::create_directories(file.parent_path().empty() ? "." : file.parent_path());
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw ConfigError("failed writing '" + tmp + "'");
  }
  std::filesystem::rename(tmp, file);
}

class Outputs {
 public:
  explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) {}
  void write(const std::string& name, const std::string& content) {
    atomic_write(dir_ / name, content);
    files_.push_back(name);
  }
  void write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }
  const std::vector<std::string>& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

inline Json criteria_json(const std::vector<Criterion>& cs) {
  Json a = Json::array();
  for (const auto& c : cs) a.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  return a;
}

inline std::string fmt(double x) { return format_double(x); }

/// Final-value and slope criteria from the thresholds block.
inline std::vector<Criterion> report_criteria(const ConvergenceReport& r, const Thresholds& t) {
  std::vector<Criterion> out;
  for (const auto& [metric, cap] : t.final) {
    if (!r.has_metric(metric)) throw ConfigError("thresholds.final names unknown metric '" + metric + "'");
    const double v = r.summary(metric, r.size() - 1).mean;
    out.push_back({"final:" + metric, v <= cap, "finest-index mean " + fmt(v) + " vs cap " + fmt(cap)});
  }
  for (const auto& metric : t.negative_slope) {
    if (!r.has_metric(metric)) throw ConfigError("thresholds.negative_slope names unknown metric '" + metric + "'");
    const auto s = r.slope(metric);
    out.push_back({"slope:" + metric, s.negative(),
                   "slope " + fmt(s.slope) + ", 95% interval [" + fmt(s.lower) + ", " + fmt(s.upper) + "]"});
  }
  return out;
}

inline Json report_summary(const ConvergenceReport& r, const Thresholds& t) {
  Json j;
  j["family"] = r.family;
  j["parameter"] = r.parameter;
  Json metrics = Json::object();
  for (const auto& m : r.metrics) {
    std::vector<double> means;
    for (std::size_t i = 0; i < r.size(); ++i) means.push_back(r.summary(m.name, i).mean);
    Json e;
    e["mean"] = means;
    e["slope"] = r.size() >= 2 ? loglog_slope(r.indices(), means) : 0.0;
    metrics[m.name] = e;
  }
  for (const auto& name : t.negative_slope) {
    if (!r.has_metric(name)) continue;
    const auto s = r.slope(name);
    metrics[name]["slope_ci"] = {s.lower, s.upper};
  }
  j["metrics"] = metrics;
  j["counters"] = r.counters;
  return j;
}

inline void emit_report(Outputs& out, const ConvergenceReport& r) {
  std::ostringstream csv, plot;
  write_report_csv(csv, r);
  emit_plot_data(plot, r);
  out.write("report.csv", csv.str());
  out.write("plot.csv", plot.str());
}

inline std::vector<PathBundle> paths_for(const ExperimentConfig& c, const Market& m) {
  if (c.path_cache) return PathCache(*c.path_cache).get(m, c.paths, c.threads);
  return m.simulate_paths(c.paths, c.threads);
}

// ---------------------------------------------------------------------------

inline RunResult run_solve(const ExperimentConfig& c, Outputs& out) {
  SolverOptions opts;
  opts.require_nullspace_in_constraint = c.solve.require_nullspace_in_constraint;
  const PsdMatrix cov(c.solve.covariance);
  const DriftVector a(c.solve.drift);
  const PortfolioFraction f = solve_phi(cov, a, c.solve.constraint, opts);
  const double growth = f.phi.dot(cov.entries() * a.alpha) - 0.5 * f.phi.dot(cov.entries() * f.phi);
  std::ostringstream csv;
  csv << "component,phi\n";
  for (Eigen::Index i = 0; i < f.phi.size(); ++i) csv << i << ',' << fmt(f.phi(i)) << '\n';
  out.write("phi.csv", csv.str());
  RunResult r;
  r.manifest.criteria.push_back({"residual", f.residual <= 1e-6, "projected-gradient residual " + fmt(f.residual)});
  if (c.thresholds.tolerance) {
    r.manifest.criteria.push_back({"residual_tolerance", f.residual <= *c.thresholds.tolerance,
                                   "residual " + fmt(f.residual) + " vs " + fmt(*c.thresholds.tolerance)});
  }
  out.write_json("summary.json", {{"phi", cfg::to_json(f.phi)},
                                  {"growth", growth},
                                  {"iterations", f.iterations},
                                  {"residual", f.residual},
                                  {"criteria", criteria_json(r.manifest.criteria)}});
  std::ostringstream msg;
  msg << "phi = (";
  for (Eigen::Index i = 0; i < f.phi.size(); ++i) msg << (i ? ", " : "") << fmt(f.phi(i));
  msg << ")";
  r.message = msg.str();
  return r;
}

inline RunResult run_simulate(const ExperimentConfig& c, Outputs& out) {
  const Market m(*c.market);
  const auto paths = paths_for(c, m);
  const PhiCache cache(m);
  const double limit = m.spec().signal.limit_noise;
  std::vector<WealthPath> num(paths.size()), cash(paths.size());
  std::vector<GrowthPath> growth(paths.size());
  parallel_for(paths.size(), c.threads, [&](std::size_t i) {
    const DriftPath a = m.filtered_drift(paths[i], limit);
    num[i] = numeraire_path(m, paths[i], a, cache);
    growth[i] = growth_path(m, a, cache);
    cash[i] = wealth_path(m, paths[i], Matrix::Zero(m.dim(), m.n_steps()));
  });
  std::ostringstream terminal;
  terminal << "path,theta,S_T_first,logX,B,L\n";
  const auto last = static_cast<Eigen::Index>(m.n_steps());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    terminal << i << ',' << fmt(paths[i].theta) << ',' << fmt(paths[i].S(0, last)) << ',' << fmt(num[i].log_wealth(last))
             << ',' << fmt(num[i].B(last)) << ',' << fmt(num[i].L(last)) << '\n';
  }
  out.write("terminal.csv", terminal.str());
  std::ostringstream first;
  write_wealth_csv(first, m.grid(), num[0], growth[0]);
  out.write("wealth_path0.csv", first.str());
  const auto defl = deflation_check(cash, num);
  RunResult r;
  r.manifest.criteria.push_back({"deflation_cash", defl.mean <= 1.0 + 3.0 * defl.std_error,
                                 "E[1/Xhat_T] = " + fmt(defl.mean) + " +- " + fmt(defl.std_error)});
  out.write_json("summary.json", {{"paths", paths.size()},
                                  {"spec_hash", hex64(market_hash(m.spec()))},
                                  {"deflated_cash_mean", defl.mean},
                                  {"deflated_cash_stderr", defl.std_error},
                                  {"criteria", criteria_json(r.manifest.criteria)}});
  r.message = "simulated " + std::to_string(paths.size()) + " paths";
  return r;
}

inline RunResult run_stability(const ExperimentConfig& c, Outputs& out) {
  const Market m(*c.market);
  ConvergenceReport rep;
  switch (c.kind) {
    case ExperimentKind::StabilityFiltration:
      rep = run_filtration_ladder(m, c.ladder.values, c.paths, {c.threads, 0, c.ladder.event_threshold});
      break;
    case ExperimentKind::StabilityProbability:
      rep = run_probability_ladder(m, c.ladder.values, c.paths, {c.threads, 0, c.ladder.event_threshold},
                                   c.ladder.paired_noise);
      break;
    default: {
      ConstraintLadderOptions o;
      o.threads = c.threads;
      o.hausdorff.net_size = c.ladder.hausdorff_net;
      o.clim_truncations = c.ladder.clim_truncations;
      rep = run_constraint_ladder(m, c.ladder.sets, c.ladder.limit_set, c.paths, o);
    }
  }
  emit_report(out, rep);
  RunResult r;
  r.manifest.criteria = report_criteria(rep, c.thresholds);
  Json s = report_summary(rep, c.thresholds);
  s["criteria"] = criteria_json(r.manifest.criteria);
  out.write_json("summary.json", s);
  r.message = rep.family + " ladder with " + std::to_string(rep.size()) + " indices";
  return r;
}

inline RunResult run_sensitivity(const ExperimentConfig& c, Outputs& out) {
  const Market m(*c.market);
  const auto& eps = c.sensitivity.eps;
  const ErrorTable first = first_order_check(m, eps, c.paths, c.threads);
  std::ostringstream f;
  write_error_csv(f, first);
  out.write("first_order.csv", f.str());
  const double gap = quotient_identity_gap(m, eps, c.paths, c.threads);
  RunResult r;
  const double tol = c.thresholds.tolerance.value_or(1e-8);
  r.manifest.criteria.push_back({"quotient_identity", gap <= tol, "max gap " + fmt(gap) + " vs " + fmt(tol)});
  Json s = {{"eps", eps}, {"identity_gap", gap}, {"first_order", {{"fv_order", first.fv_order}, {"qv_order", first.qv_order}}}};
  std::optional<ErrorTable> second;
  if (c.sensitivity.second_order) {
    second = second_order_check(m, eps, c.paths, c.threads);
    std::ostringstream g;
    write_error_csv(g, *second);
    out.write("second_order.csv", g.str());
    s["second_order"] = {{"fv_order", second->fv_order}, {"qv_order", second->qv_order}};
  }
  if (c.thresholds.order) {
    const auto [lo, hi] = *c.thresholds.order;
    auto check = [&](const char* name, double order) {
      r.manifest.criteria.push_back(
          {name, order >= lo && order <= hi, "order " + fmt(order) + " vs [" + fmt(lo) + ", " + fmt(hi) + "]"});
    };
    check("first_order", first.fv_order);
    if (second) check("second_order", second->fv_order);
  }
  s["criteria"] = criteria_json(r.manifest.criteria);
  out.write_json("summary.json", s);
  r.message = "first-order fitted order " + fmt(first.fv_order);
  return r;
}

inline RunResult run_counterexample(const ExperimentConfig& c, Outputs& out) {
  const auto& ce = c.counterexample;
  const DiscontinuityReport rep = discontinuity_report(ce.p, ce.n, ce.quadrature, ce.conditional_mean, ce.eps);
  std::ostringstream csv;
  csv << "n,theta,gap,natural_lower,natural_upper\n";
  for (const auto& row : rep.rows) {
    csv << row.n << ',' << fmt(row.theta) << ',' << fmt(row.gap) << ',' << fmt(row.natural_lower) << ','
        << fmt(row.natural_upper) << '\n';
  }
  csv << "inf," << fmt(one_period_optimal(OnePeriodMarket{ce.p, std::nullopt, ce.quadrature, ce.conditional_mean, ce.eps}).theta)
      << ",0," << fmt(rep.limit_natural_lower) << ',' << fmt(rep.limit_natural_upper) << '\n';
  out.write("gap.csv", csv.str());

  std::ostringstream trend;
  trend << "n,range_sd,theta\n";
  for (int n : ce.n) {
    OnePeriodMarket mk{ce.p, n, ce.quadrature, ce.conditional_mean, ce.eps};
    const auto th = range_trend(mk, ce.ranges);
    for (std::size_t i = 0; i < th.size(); ++i) trend << n << ',' << fmt(ce.ranges[i]) << ',' << fmt(th[i]) << '\n';
  }
  out.write("range_trend.csv", trend.str());

  const double tol = c.thresholds.tolerance.value_or(1e-6);
  double worst = 0.0;
  for (const auto& row : rep.rows) worst = std::max(worst, std::abs(row.gap - rep.limit_gap));
  RunResult r;
  r.manifest.criteria.push_back({"gap_constant", worst <= tol,
                                 "gaps equal |2p-1| = " + fmt(rep.limit_gap) + " within " + fmt(worst)});
  out.write_json("summary.json", {{"p", ce.p},
                                  {"limit_gap", rep.limit_gap},
                                  {"max_gap_deviation", worst},
                                  {"criteria", criteria_json(r.manifest.criteria)}});
  r.message = "gap " + fmt(rep.limit_gap) + " at every finite n";
  return r;
}

inline RunResult run_tree(const ExperimentConfig& c, Outputs& out) {
  const auto& t = c.tree;
  TreeProcess chi;
  if (t.process == "random_binary") chi = random_binary_process(t.tree, t.process_seed);
  else if (t.process == "leaf_indicator") chi = leaf_indicator_process(t.tree, t.leaf);
  else chi = t.values;
  const TreeConvergence conv = tree_projection_convergence(t.tree, chi, t.lookahead);
  std::ostringstream csv;
  csv << "lookahead,expected_distance,max_scenario_distance\n";
  for (std::size_t i = 0; i < conv.ladder.size(); ++i) {
    csv << conv.ladder[i] << ',' << fmt(conv.expected[i]) << ','
        << fmt(conv.per_scenario.col(static_cast<Eigen::Index>(i)).maxCoeff()) << '\n';
  }
  out.write("tree.csv", csv.str());
  RunResult r;
  bool monotone = true;
  for (std::size_t i = 1; i < conv.expected.size(); ++i) monotone = monotone && conv.expected[i] <= conv.expected[i - 1];
  r.manifest.criteria.push_back({"nonincreasing", monotone, "expected distance along the lookahead ladder"});
  if (conv.ladder.back() >= t.tree.depth) {
    r.manifest.criteria.push_back({"zero_at_depth", conv.expected.back() == 0.0, "final distance " + fmt(conv.expected.back())});
  }
  double l1_proj = 0.0;
  for (int n : conv.ladder) l1_proj = std::max(l1_proj, tree_l1(t.tree, tree_predictable_projection(t.tree, chi, n)));
  r.manifest.criteria.push_back({"contraction", l1_proj <= tree_l1(t.tree, chi) + 1e-12,
                                 "max projected L1 " + fmt(l1_proj) + " vs " + fmt(tree_l1(t.tree, chi))});
  out.write_json("summary.json", {{"lookahead", conv.ladder},
                                  {"expected", conv.expected},
                                  {"criteria", criteria_json(r.manifest.criteria)}});
  r.message = "tree of depth " + std::to_string(t.tree.depth);
  return r;
}

inline RunResult run_density(const ExperimentConfig& c, Outputs& out) {
  const auto& d = c.density;
  std::vector<std::vector<Vector>> z(d.ladder.size(), std::vector<Vector>(c.paths));
  if (d.source == "exponential") {
    if (d.steps < 1 || !(d.horizon > 0.0)) throw ConfigError("density needs positive steps and horizon");
    const double dt = d.horizon / d.steps;
    parallel_for(c.paths, c.threads, [&](std::size_t p) {
      for (std::size_t i = 0; i < d.ladder.size(); ++i) {
        auto eng = path_engine(c.seed, p);  // common draws across the ladder
        Normal g;
        Vector path(d.steps + 1);
        path(0) = 1.0;
        const double s = d.ladder[i];
        for (int k = 0; k < d.steps; ++k) path(k + 1) = path(k) * std::exp(s * std::sqrt(dt) * g(eng) - 0.5 * s * s * dt);
        z[i][p] = path;
      }
    });
  } else {
    const Market m(*c.market);
    parallel_for(c.paths, c.threads, [&](std::size_t p) {
      const PathBundle b = m.simulate_path(p);
      for (std::size_t i = 0; i < d.ladder.size(); ++i) z[i][p] = m.tilt_density(b, d.ladder[i]).z;
    });
  }
  const ConvergenceReport rep = density_report(z, d.ladder);
  emit_report(out, rep);
  RunResult r;
  r.manifest.criteria = report_criteria(rep, c.thresholds);
  if (d.source == "exponential") {
    // Closed-form moments alongside the estimates.
    std::ostringstream csv;
    csv << "sigma,terminal_exact,terminal_mean,zz_exact,zz_mean,rr_exact,rr_mean\n";
    for (std::size_t i = 0; i < rep.size(); ++i) {
      const auto e = stochastic_exponential_moments(d.ladder[i], d.horizon, d.steps);
      csv << fmt(d.ladder[i]) << ',' << fmt(e.terminal_abs) << ',' << fmt(rep.summary("z_terminal", i).mean) << ','
          << fmt(e.zz) << ',' << fmt(rep.summary("z_qv", i).mean) << ',' << fmt(e.rr) << ','
          << fmt(rep.summary("r_qv", i).mean) << '\n';
    }
    out.write("closed_form.csv", csv.str());
  }
  Json s = report_summary(rep, c.thresholds);
  s["criteria"] = criteria_json(r.manifest.criteria);
  out.write_json("summary.json", s);
  r.message = "density ladder with " + std::to_string(rep.size()) + " indices";
  return r;
}

}  // namespace detail

inline Json manifest_json(const RunManifest& m) {
  return {{"config_hash", m.config_hash},
          {"version", m.version},
          {"wall_clock_seconds", m.wall_clock_seconds},
          {"all_pass", m.all_pass()},
          {"criteria", detail::criteria_json(m.criteria)},
          {"files", m.files}};
}

/// Runs the experiment, writing outputs and manifest.json into output_dir.
inline RunResult run(const ExperimentConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  detail::Outputs out(c.output_dir);
  RunResult r;
  switch (c.kind) {
    case ExperimentKind::Solve: r = detail::run_solve(c, out); break;
    case ExperimentKind::Simulate: r = detail::run_simulate(c, out); break;
    case ExperimentKind::StabilityFiltration:
    case ExperimentKind::StabilityProbability:
    case ExperimentKind::StabilityConstraint: r = detail::run_stability(c, out); break;
    case ExperimentKind::Sensitivity: r = detail::run_sensitivity(c, out); break;
    case ExperimentKind::Counterexample: r = detail::run_counterexample(c, out); break;
    case ExperimentKind::TreeProjection: r = detail::run_tree(c, out); break;
    case ExperimentKind::DensityCheck: r = detail::run_density(c, out); break;
  }
  r.manifest.config_hash = detail::hex64(c.hash());
  r.manifest.files = out.files();
  r.manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  detail::atomic_write(out.dir() / "manifest.json", manifest_json(r.manifest).dump(2) + "\n");
  return r;
}

}  // namespace numeraire
