#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "numeraire/hausdorff.hpp"
#include "numeraire/market.hpp"
#include "numeraire/numeraire.hpp"
#include "numeraire/parallel.hpp"
#include "numeraire/statistics.hpp"

namespace numeraire {

struct MetricSeries {
  std::string name;
  std::vector<std::vector<double>> samples;  // [ladder index][path]
};

struct MetricSummary {
  double mean = 0.0;
  double std_error = 0.0;
  double median = 0.0;
  double q95 = 0.0;
};

struct ConvergenceReport {
  std::string family;
  std::vector<double> parameter;  // sigma_n, eps_n or a set label value per index
  std::vector<MetricSeries> metrics;
  std::map<std::string, long> counters;

  std::size_t size() const { return parameter.size(); }
  std::vector<double> indices() const {
    std::vector<double> n(parameter.size());
    for (std::size_t i = 0; i < n.size(); ++i) n[i] = static_cast<double>(i + 1);
    return n;
  }

  const MetricSeries& metric(const std::string& name) const {
    for (const auto& m : metrics) {
      if (m.name == name) return m;
    }
    throw InputError("report has no metric '" + name + "'");
  }
  bool has_metric(const std::string& name) const {
    return std::any_of(metrics.begin(), metrics.end(), [&](const auto& m) { return m.name == name; });
  }

  MetricSummary summary(const std::string& name, std::size_t i) const {
    const auto& s = metric(name).samples.at(i);
    MetricSummary out;
    out.mean = mean_of(s);
    out.std_error = stderr_of(s);
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    if (!sorted.empty()) {
      out.median = sorted_quantile(sorted, 0.5);
      out.q95 = sorted_quantile(sorted, 0.95);
    }
    return out;
  }

  /// Log-log slope of the mean against the ladder index n = 1..N.
  SlopeEstimate slope(const std::string& name, int resamples = 1000, std::uint64_t seed = 12345) const {
    return bootstrap_slope(indices(), metric(name).samples, resamples, seed);
  }
};

namespace detail {

inline ConvergenceReport make_report(std::string family, std::vector<double> parameter,
                                     const std::vector<std::string>& names, std::size_t n_paths) {
  ConvergenceReport r;
  r.family = std::move(family);
  r.parameter = std::move(parameter);
  for (const auto& n : names) {
    r.metrics.push_back({n, std::vector<std::vector<double>>(r.parameter.size(), std::vector<double>(n_paths, 0.0))});
  }
  return r;
}

inline void check_ladder(const std::vector<double>& values, double limit, const char* what) {
  if (values.empty()) throw InvalidSpec(std::string(what) + " ladder is empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= limit) || !std::isfinite(values[i])) {
      throw InvalidSpec(std::string(what) + " ladder values must be finite and not below the limit");
    }
    if (i > 0 && values[i] > values[i - 1]) throw InvalidSpec(std::string(what) + " ladder must be nonincreasing");
  }
}

inline void record_distance(ConvergenceReport& r, std::size_t slot_fv, std::size_t slot_qv, std::size_t i,
                            std::size_t path, const WealthPath& a, const WealthPath& b) {
  const auto d = semimartingale_distance(a, b);
  r.metrics[slot_fv].samples[i][path] = d.fv_distance;
  r.metrics[slot_qv].samples[i][path] = d.qv_distance;
}

}  // namespace detail

struct LadderOptions {
  int threads = 1;
  std::uint64_t first_path = 0;
  // Threshold q of the event {theta > q} in the filtration diagnostics.
  double event_threshold = 0.0;
};

/// Filtration family: F^n observes theta with noise sigma_n, the limit with
/// the market's limit noise. Probability fixed at Pbar.
inline ConvergenceReport run_filtration_ladder(const Market& m, const std::vector<double>& sigmas, std::size_t n_paths,
                                               const LadderOptions& opts = {}) {
  const double limit = m.spec().signal.limit_noise;
  detail::check_ladder(sigmas, limit, "filtration");
  if (n_paths == 0) throw InvalidSpec("path count must be positive");
  const std::vector<std::string> names = {"fv_distance",     "qv_distance",    "sup_rel_error",
                                          "sup_rel_error_n", "drift_distance", "event_gap"};
  ConvergenceReport r = detail::make_report("filtration", sigmas, names, n_paths);
  const PhiCache cache(m);
  parallel_for(n_paths, opts.threads, [&](std::size_t path) {
    const PathBundle p = m.simulate_path(opts.first_path + path);
    const DriftPath a_inf = m.filtered_drift(p, limit);
    const WealthPath w_inf = numeraire_path(m, p, a_inf, cache);
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      const DriftPath a_n = m.filtered_drift(p, sigmas[i]);
      const WealthPath w_n = numeraire_path(m, p, a_n, cache);
      const auto d = semimartingale_distance(w_n, w_inf);
      r.metrics[0].samples[i][path] = d.fv_distance;
      r.metrics[1].samples[i][path] = d.qv_distance;
      r.metrics[2].samples[i][path] = d.sup_rel_error;
      r.metrics[3].samples[i][path] = sup_relative_error(w_inf, w_n);
      r.metrics[4].samples[i][path] = m.drift_distance_l1(a_n, a_inf);
      r.metrics[5].samples[i][path] = m.event_probability_gap(p, sigmas[i], limit, opts.event_threshold);
    }
  });
  return r;
}

/// Probability family P^{eps_n} -> Pbar, optionally paired with a filtration
/// ladder sigma_n so that both legs of the proof plan are exercised:
///   main1: Xtilde^n (F^n, Pbar) against Xtilde^inf,
///   main2: Xhat^n (F^n, P^n) against Xtilde^n.
/// Without a paired ladder every index uses the limit filtration and main1
/// is identically zero.
inline ConvergenceReport run_probability_ladder(const Market& m, const std::vector<double>& eps,
                                                std::size_t n_paths, const LadderOptions& opts = {},
                                                std::vector<double> sigmas = {}) {
  const double limit = m.spec().signal.limit_noise;
  detail::check_ladder(eps, 0.0, "probability");
  if (eps.front() > 1.0) throw InvalidSpec("tilt sizes must lie in [0, 1]");
  if (sigmas.empty()) {
    sigmas.assign(eps.size(), limit);
  } else {
    if (sigmas.size() != eps.size()) throw InvalidSpec("paired filtration ladder must match the tilt ladder");
    detail::check_ladder(sigmas, limit, "filtration");
  }
  if (n_paths == 0) throw InvalidSpec("path count must be positive");
  const std::vector<std::string> names = {
      "z_terminal", "z_sup",    "z_qv",       "r_qv",          "drift_gap",       "main1_fv",
      "main1_qv",   "main2_fv", "main2_qv",   "fv_distance",   "qv_distance",     "sup_rel_error",
      "sup_rel_error_n"};
  ConvergenceReport r = detail::make_report("probability", eps, names, n_paths);
  std::vector<int> floor_hit_paths(n_paths, 0);
  const PhiCache cache(m);
  parallel_for(n_paths, opts.threads, [&](std::size_t path) {
    const PathBundle p = m.simulate_path(opts.first_path + path);
    const DriftPath a_inf = m.filtered_drift(p, limit);
    const WealthPath w_inf = numeraire_path(m, p, a_inf, cache);
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const FilteredTilt t = m.filtered_tilt(p, sigmas[i], eps[i]);
      if (t.floor_hits > 0) floor_hit_paths[path] = 1;
      const Vector& z = t.z;
      const Eigen::Index last = z.size() - 1;
      double sup = 0.0, zz = 0.0, rr = 0.0;
      for (Eigen::Index k = 0; k <= last; ++k) {
        sup = std::max(sup, std::abs(z(k) - 1.0));
        if (k > 0) {
          const double dz = z(k) - z(k - 1);
          zz += dz * dz;
          rr += (dz / z(k - 1)) * (dz / z(k - 1));
        }
      }
      r.metrics[0].samples[i][path] = std::abs(z(last) - 1.0);
      r.metrics[1].samples[i][path] = sup;
      r.metrics[2].samples[i][path] = zz;
      r.metrics[3].samples[i][path] = rr;
      r.metrics[4].samples[i][path] = m.drift_distance(t.drift, t.tilde_drift);
      const WealthPath w_tilde = numeraire_path(m, p, t.tilde_drift, cache);
      const WealthPath w_hat = numeraire_path(m, p, t.drift, cache);
      detail::record_distance(r, 5, 6, i, path, w_tilde, w_inf);
      detail::record_distance(r, 7, 8, i, path, w_hat, w_tilde);
      const auto d = semimartingale_distance(w_hat, w_inf);
      r.metrics[9].samples[i][path] = d.fv_distance;
      r.metrics[10].samples[i][path] = d.qv_distance;
      r.metrics[11].samples[i][path] = d.sup_rel_error;
      r.metrics[12].samples[i][path] = sup_relative_error(w_inf, w_hat);
    }
  });
  long hits = 0;
  for (int h : floor_hit_paths) hits += h;
  r.counters["floor_hit_paths"] = hits;
  if (static_cast<double>(hits) > 1e-3 * static_cast<double>(n_paths)) {
    throw DensityFloorHit("density floor reached on " + std::to_string(hits) + " of " + std::to_string(n_paths) +
                          " paths");
  }
  return r;
}

struct ConstraintLadderOptions : LadderOptions {
  HausdorffOptions hausdorff{};
  double bound_slack = 1e-6;
  // Truncations used to confirm the ladder converges in C-lim.
  std::vector<double> clim_truncations = {1.0, 5.0};
};

/// Constraint family K^n -> K^inf with the limit filtration and Pbar.
/// Besides the distances, each step checks
///   |phi^n - phi^inf|_c^2 <= 4 |a|_c dist(K^n cap B(m), K^inf cap B(m)) + slack
/// with m = |a|_c ("bound_violations") and with m = max(|phi^n|, |phi^inf|)
/// ("bound_violations_euclid"), counting failing steps.
inline ConvergenceReport run_constraint_ladder(const Market& m, const std::vector<ConstraintSet>& sets,
                                               const ConstraintSet& limit_set, std::size_t n_paths,
                                               const ConstraintLadderOptions& opts = {}) {
  if (sets.empty()) throw InvalidSpec("constraint ladder is empty");
  if (n_paths == 0) throw InvalidSpec("path count must be positive");
  const auto d = m.dim();
  limit_set.validate(d);
  for (const auto& k : sets) k.validate(d);
  const Matrix clim = c_lim_check(sets, limit_set, opts.clim_truncations, d, opts.hausdorff);
  for (Eigen::Index t = 0; t < clim.rows(); ++t) {
    for (Eigen::Index i = 1; i < clim.cols(); ++i) {
      if (clim(t, i) > clim(t, i - 1) + 1e-9) {
        throw InvalidSpec("constraint ladder does not approach its limit monotonically");
      }
    }
  }
  std::vector<double> label(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) label[i] = clim(clim.rows() - 1, static_cast<Eigen::Index>(i));

  const std::vector<std::string> names = {"fv_distance", "qv_distance",      "sup_rel_error",         "sup_rel_error_n",
                                          "growth",      "bound_violations", "bound_violations_euclid", "bound_ratio"};
  ConvergenceReport r = detail::make_report("constraint", label, names, n_paths);
  const double limit_noise = m.spec().signal.limit_noise;
  const PhiCache lim_cache(m, {limit_set});
  std::vector<PhiCache> caches;
  std::vector<CompiledSet> compiled;
  for (const auto& k : sets) {
    caches.emplace_back(m, std::vector<ConstraintSet>{k});
    compiled.push_back(k.compile(d));
  }
  const CompiledSet lim_compiled = limit_set.compile(d);

  parallel_for(n_paths, opts.threads, [&](std::size_t path) {
    const PathBundle p = m.simulate_path(opts.first_path + path);
    const DriftPath a = m.filtered_drift(p, limit_noise);
    Matrix phi_inf;
    const WealthPath w_inf = numeraire_path(m, p, a, lim_cache, &phi_inf);
    for (std::size_t i = 0; i < sets.size(); ++i) {
      Matrix phi_n;
      const WealthPath w_n = numeraire_path(m, p, a, caches[i], &phi_n);
      const auto dist = semimartingale_distance(w_n, w_inf);
      r.metrics[0].samples[i][path] = dist.fv_distance;
      r.metrics[1].samples[i][path] = dist.qv_distance;
      r.metrics[2].samples[i][path] = dist.sup_rel_error;
      r.metrics[3].samples[i][path] = sup_relative_error(w_inf, w_n);
      r.metrics[4].samples[i][path] = w_n.B(w_n.B.size() - 1);
      double violations = 0.0, violations_euclid = 0.0, worst = 0.0;
      for (int k = 0; k < m.n_steps(); ++k) {
        const Vector diff = phi_n.col(k) - phi_inf.col(k);
        const Matrix& c = m.covariance(k).entries();
        const double lhs = diff.dot(c * diff);
        if (lhs <= opts.bound_slack) continue;
        const double a_norm = std::sqrt(std::max(0.0, a.col(k).dot(c * a.col(k))));
        auto holds = [&](double trunc) {
          if (!(a_norm > 0.0) || !(trunc > 0.0)) return false;
          HausdorffOptions h = opts.hausdorff;
          h.stop_at = (lhs - opts.bound_slack) / (4.0 * a_norm);
          const double dist_lb = hausdorff_distance(compiled[i], lim_compiled, trunc, h);
          worst = std::max(worst, lhs / (4.0 * a_norm * dist_lb + opts.bound_slack));
          return dist_lb >= h.stop_at;
        };
        if (!holds(a_norm)) violations += 1.0;
        const double euclid = std::max(phi_n.col(k).norm(), phi_inf.col(k).norm()) * (1.0 + 1e-12);
        if (!holds(euclid)) violations_euclid += 1.0;
      }
      r.metrics[5].samples[i][path] = violations;
      r.metrics[6].samples[i][path] = violations_euclid;
      r.metrics[7].samples[i][path] = worst;
    }
  });
  return r;
}

struct DensityRow {
  MetricSummary terminal;  // E|Z_T - 1|
  MetricSummary sup;       // E sup_t |Z_t - 1|
  MetricSummary zz;        // E [Z, Z]_T
  MetricSummary rr;        // E [R, R]_T, dR = dZ / Z_-
};

/// Per-path density diagnostics as a report with metrics z_terminal
/// (|Z_T - 1|), z_sup, z_qv ([Z, Z]_T) and r_qv ([R, R]_T, dR = dZ / Z_-).
inline ConvergenceReport density_report(const std::vector<std::vector<Vector>>& z, std::vector<double> parameter = {}) {
  if (parameter.empty()) {
    for (std::size_t i = 0; i < z.size(); ++i) parameter.push_back(static_cast<double>(i + 1));
  }
  if (parameter.size() != z.size()) throw InputError("one parameter per density ladder index");
  ConvergenceReport r;
  r.family = "density";
  r.parameter = std::move(parameter);
  for (const char* name : {"z_terminal", "z_sup", "z_qv", "r_qv"}) {
    r.metrics.push_back({name, std::vector<std::vector<double>>(z.size())});
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (const Vector& path : z[i]) {
      if (path.size() < 1) throw InputError("density path is empty");
      if (std::abs(path(0) - 1.0) > 1e-12) throw InputError("density paths must start at 1");
      if ((path.array() <= 0.0).any()) throw InputError("density paths must be strictly positive");
      double sup = 0.0, zz = 0.0, rr = 0.0;
      for (Eigen::Index k = 0; k < path.size(); ++k) {
        sup = std::max(sup, std::abs(path(k) - 1.0));
        if (k > 0) {
          const double dz = path(k) - path(k - 1);
          zz += dz * dz;
          rr += (dz / path(k - 1)) * (dz / path(k - 1));
        }
      }
      r.metrics[0].samples[i].push_back(std::abs(path(path.size() - 1) - 1.0));
      r.metrics[1].samples[i].push_back(sup);
      r.metrics[2].samples[i].push_back(zz);
      r.metrics[3].samples[i].push_back(rr);
    }
  }
  return r;
}

/// Four diagnostics per ladder index from density paths z[index][path].
inline std::vector<DensityRow> density_sequence_check(const std::vector<std::vector<Vector>>& z) {
  const ConvergenceReport r = density_report(z);
  std::vector<DensityRow> rows;
  for (std::size_t i = 0; i < r.size(); ++i) {
    rows.push_back({r.summary("z_terminal", i), r.summary("z_sup", i), r.summary("z_qv", i), r.summary("r_qv", i)});
  }
  return rows;
}

// Exact moments of Z = E(sigma W) sampled on N equal steps over [0, T]:
// E|Z_T - 1| = 2 (2 Phi(sigma sqrt(T) / 2) - 1), E[Z, Z]_T = e^{sigma^2 T} - 1,
// E[R, R]_T = N (e^{sigma^2 T / N} - 1).
struct ExponentialMoments {
  double terminal_abs = 0.0;
  double zz = 0.0;
  double rr = 0.0;
};

inline ExponentialMoments stochastic_exponential_moments(double sigma, double horizon, int n_steps) {
  ExponentialMoments e;
  const double v = sigma * sigma * horizon;
  e.terminal_abs = 2.0 * (2.0 * normal_cdf(0.5 * std::sqrt(v)) - 1.0);
  e.zz = std::expm1(v);
  e.rr = n_steps * std::expm1(v / n_steps);
  return e;
}

/// Per-index CSV: index, parameter, then mean/stderr/median/q95 per metric.
inline void write_report_csv(std::ostream& os, const ConvergenceReport& r) {
  os << "index,parameter";
  for (const auto& m : r.metrics) os << ',' << m.name << "_mean," << m.name << "_stderr," << m.name << "_median,"
                                     << m.name << "_q95";
  os << '\n';
  for (std::size_t i = 0; i < r.size(); ++i) {
    os << (i + 1) << ',' << format_double(r.parameter[i]);
    for (const auto& m : r.metrics) {
      const auto s = r.summary(m.name, i);
      os << ',' << format_double(s.mean) << ',' << format_double(s.std_error) << ',' << format_double(s.median) << ','
         << format_double(s.q95);
    }
    os << '\n';
  }
}

/// Long format: ladder_index, metric, value, stderr (value is the mean).
inline void emit_plot_data(std::ostream& os, const ConvergenceReport& r) {
  os << "ladder_index,metric,value,stderr\n";
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (const auto& m : r.metrics) {
      const auto s = r.summary(m.name, i);
      os << (i + 1) << ',' << m.name << ',' << format_double(s.mean) << ',' << format_double(s.std_error) << '\n';
    }
  }
}

}  // namespace numeraire
