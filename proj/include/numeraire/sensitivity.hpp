#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "numeraire/market.hpp"
#include "numeraire/numeraire.hpp"
#include "numeraire/parallel.hpp"
#include "numeraire/statistics.hpp"

namespace numeraire {

// A process on the grid split into finite-variation and martingale parts
// relative to the base market; both have N+1 entries starting at 0.
struct SplitPath {
  Vector B;
  Vector L;

  Vector total() const { return B + L; }
};

struct LogRatioQuotient {
  SplitPath direct;   // (1/eps)(log Xhat^eps - log Xhat^0) from two numeraire paths
  SplitPath formula;  // -(eps/2) int |lambda^eps|_c^2 dG + int lambda^eps dM^0
};

struct ExpansionRecord {
  SplitPath first_order_limit;   // int lambda^0 dM^0
  SplitPath second_order_limit;  // -1/2 int |lambda^0|_c^2 dG - int lambda^0 (Z^1 - 1) dM^0
  std::vector<double> eps;
  std::vector<SplitPath> quotients;
};

struct ErrorRow {
  double eps = 0.0;
  double fv_error = 0.0;
  double qv_error = 0.0;
  double fv_stderr = 0.0;
  double qv_stderr = 0.0;
};

struct ErrorTable {
  std::vector<ErrorRow> rows;
  double fv_order = 0.0;  // slope of log fv_error against log eps
  double qv_order = 0.0;  // same for sqrt(qv_error)
};

namespace detail {

inline void require_unconstrained(const Market& m) {
  for (int k = 0; k < m.n_steps(); ++k) {
    if (!m.constraint(k).compile(m.dim()).is_full_space()) {
      throw InvalidSpec("the expansion is only available for unconstrained markets");
    }
  }
}

inline SplitPath scaled_difference(const WealthPath& a, const WealthPath& b, double scale) {
  return {(a.B - b.B) * scale, (a.L - b.L) * scale};
}

inline void split_distance(const SplitPath& x, const SplitPath& y, double& fv, double& qv) {
  fv = 0.0;
  qv = 0.0;
  for (Eigen::Index k = 1; k < x.B.size(); ++k) {
    fv += std::abs((x.B(k) - x.B(k - 1)) - (y.B(k) - y.B(k - 1)));
    const double dl = (x.L(k) - x.L(k - 1)) - (y.L(k) - y.L(k - 1));
    qv += dl * dl;
  }
}

}  // namespace detail

/// (1/eps) log(Xhat^eps / Xhat^0) by both routes. Unconstrained, so the
/// numeraire fractions are the drifts themselves.
inline LogRatioQuotient log_ratio_quotient(const Market& m, const PathBundle& p, double eps) {
  detail::require_unconstrained(m);
  if (!(eps > 0.0 && eps <= 1.0)) throw InvalidSpec("quotient needs eps in (0, 1]");
  const int n = m.n_steps();
  const DensityDecomposition z = m.tilt_density(p, eps);
  const DriftPath a0 = m.true_drift(p);
  const DriftPath ae = a0 + eps * z.lambda;
  const WealthPath w0 = wealth_path(m, p, a0);
  const WealthPath we = wealth_path(m, p, ae);
  LogRatioQuotient q;
  q.direct = detail::scaled_difference(we, w0, 1.0 / eps);
  q.formula.B.resize(n + 1);
  q.formula.L.resize(n + 1);
  q.formula.B(0) = q.formula.L(0) = 0.0;
  for (int k = 0; k < n; ++k) {
    const Vector lam = z.lambda.col(k);
    const double lcl = lam.dot(m.covariance(k).entries() * lam);
    q.formula.B(k + 1) = q.formula.B(k) - 0.5 * eps * lcl * m.clock().at(k);
    q.formula.L(k + 1) = q.formula.L(k) + lam.dot(p.dM.col(k));
  }
  return q;
}

/// The two limits of the expansion along one path.
inline ExpansionRecord expansion_limits(const Market& m, const PathBundle& p) {
  const int n = m.n_steps();
  const DensityDecomposition z = m.tilt_density(p, 0.0);  // lambda^0 = Z^1 lambda1
  ExpansionRecord r;
  r.first_order_limit.B = Vector::Zero(n + 1);
  r.first_order_limit.L.resize(n + 1);
  r.second_order_limit.B.resize(n + 1);
  r.second_order_limit.L.resize(n + 1);
  r.first_order_limit.L(0) = r.second_order_limit.B(0) = r.second_order_limit.L(0) = 0.0;
  for (int k = 0; k < n; ++k) {
    const Vector lam0 = z.lambda.col(k);
    const double dm = lam0.dot(p.dM.col(k));
    r.first_order_limit.L(k + 1) = r.first_order_limit.L(k) + dm;
    r.second_order_limit.B(k + 1) =
        r.second_order_limit.B(k) - 0.5 * lam0.dot(m.covariance(k).entries() * lam0) * m.clock().at(k);
    r.second_order_limit.L(k + 1) = r.second_order_limit.L(k) - (z.z1(k) - 1.0) * dm;
  }
  return r;
}

inline ExpansionRecord first_order_record(const Market& m, const PathBundle& p, const std::vector<double>& eps) {
  ExpansionRecord r = expansion_limits(m, p);
  r.eps = eps;
  for (double e : eps) r.quotients.push_back(log_ratio_quotient(m, p, e).direct);
  return r;
}

namespace detail {

inline ErrorTable tabulate(const std::vector<double>& eps, const std::vector<std::vector<double>>& fv,
                           const std::vector<std::vector<double>>& qv) {
  ErrorTable t;
  std::vector<double> fv_mean, qv_root;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    ErrorRow row;
    row.eps = eps[i];
    row.fv_error = mean_of(fv[i]);
    row.qv_error = mean_of(qv[i]);
    row.fv_stderr = stderr_of(fv[i]);
    row.qv_stderr = stderr_of(qv[i]);
    t.rows.push_back(row);
    fv_mean.push_back(row.fv_error);
    qv_root.push_back(std::sqrt(row.qv_error));
  }
  if (eps.size() >= 2) {
    t.fv_order = loglog_slope(eps, fv_mean);
    t.qv_order = loglog_slope(eps, qv_root);
  }
  return t;
}

inline void check_eps_ladder(const std::vector<double>& eps) {
  if (eps.empty()) throw InvalidSpec("eps ladder is empty");
  for (double e : eps) {
    if (!(e > 0.0 && e <= 1.0)) throw InvalidSpec("eps ladder values must lie in (0, 1]");
  }
}

}  // namespace detail

/// Errors of the quotient against int lambda^0 dM^0, averaged over paths
/// first_path .. first_path + n_paths - 1.
inline ErrorTable first_order_check(const Market& m, const std::vector<double>& eps, std::size_t n_paths,
                                    int threads = 1, std::uint64_t first_path = 0) {
  detail::require_unconstrained(m);
  detail::check_eps_ladder(eps);
  std::vector<std::vector<double>> fv(eps.size(), std::vector<double>(n_paths));
  std::vector<std::vector<double>> qv = fv;
  parallel_for(n_paths, threads, [&](std::size_t path) {
    const PathBundle p = m.simulate_path(first_path + path);
    const ExpansionRecord lim = expansion_limits(m, p);
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const SplitPath q = log_ratio_quotient(m, p, eps[i]).direct;
      detail::split_distance(q, lim.first_order_limit, fv[i][path], qv[i][path]);
    }
  });
  return detail::tabulate(eps, fv, qv);
}

/// Errors of (1/eps)(quotient - first-order limit) against the second-order limit.
inline ErrorTable second_order_check(const Market& m, const std::vector<double>& eps, std::size_t n_paths,
                                     int threads = 1, std::uint64_t first_path = 0) {
  detail::require_unconstrained(m);
  detail::check_eps_ladder(eps);
  std::vector<std::vector<double>> fv(eps.size(), std::vector<double>(n_paths));
  std::vector<std::vector<double>> qv = fv;
  parallel_for(n_paths, threads, [&](std::size_t path) {
    const PathBundle p = m.simulate_path(first_path + path);
    const ExpansionRecord lim = expansion_limits(m, p);
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const SplitPath q = log_ratio_quotient(m, p, eps[i]).direct;
      const SplitPath rem{(q.B - lim.first_order_limit.B) / eps[i], (q.L - lim.first_order_limit.L) / eps[i]};
      detail::split_distance(rem, lim.second_order_limit, fv[i][path], qv[i][path]);
    }
  });
  return detail::tabulate(eps, fv, qv);
}

/// Largest per-grid-point gap between the two quotient routes over paths.
inline double quotient_identity_gap(const Market& m, const std::vector<double>& eps, std::size_t n_paths,
                                    int threads = 1, std::uint64_t first_path = 0) {
  std::vector<double> worst(n_paths, 0.0);
  parallel_for(n_paths, threads, [&](std::size_t path) {
    const PathBundle p = m.simulate_path(first_path + path);
    for (double e : eps) {
      const LogRatioQuotient q = log_ratio_quotient(m, p, e);
      worst[path] = std::max(worst[path], (q.direct.total() - q.formula.total()).cwiseAbs().maxCoeff());
    }
  });
  double w = 0.0;
  for (double x : worst) w = std::max(w, x);
  return w;
}

/// Columns eps, fv_error, qv_error, fitted order (the fitted order repeats
/// on every row).
inline void write_error_csv(std::ostream& os, const ErrorTable& t) {
  os << "eps,fv_error,qv_error,fitted_order\n";
  for (const auto& r : t.rows) {
    os << format_double(r.eps) << ',' << format_double(r.fv_error) << ',' << format_double(r.qv_error) << ','
       << format_double(t.fv_order) << '\n';
  }
}

}  // namespace numeraire
