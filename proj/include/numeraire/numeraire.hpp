#pragma once

#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "numeraire/market.hpp"
#include "numeraire/quadform.hpp"

namespace numeraire {

// log X = B + L with B the finite-variation part and L the martingale part
// under the base market. All three have N+1 entries and start at 0.
struct WealthPath {
  Vector log_wealth;
  Vector B;
  Vector L;
};

struct GrowthPath {
  Vector rate;        // per step, per unit of G
  Vector cumulative;  // N+1
};

struct SemimartingaleDistance {
  double fv_distance = 0.0;
  double qv_distance = 0.0;
  double sup_rel_error = 0.0;
};

/// One PhiSolver per distinct (c_k, K_k) along the grid, shared by all paths
/// and all ladder indices that use the same constraint process.
class PhiCache {
 public:
  PhiCache(const Market& m, SolverOptions opts = {}) : PhiCache(m, m.spec().constraints, opts) {}

  PhiCache(const Market& m, const std::vector<ConstraintSet>& constraints, SolverOptions opts = {}) {
    const int n = m.n_steps();
    if (constraints.empty() || (constraints.size() != 1 && constraints.size() != static_cast<size_t>(n))) {
      throw InvalidSpec("constraint process must have one set or one per step");
    }
    const bool shared = m.constant_covariance() && constraints.size() == 1;
    step_.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
      if (shared && k > 0) {
        step_[static_cast<size_t>(k)] = 0;
        continue;
      }
      const auto& kset = constraints.size() == 1 ? constraints.front() : constraints[static_cast<size_t>(k)];
      kset.validate(m.dim());
      solvers_.push_back(std::make_shared<const PhiSolver>(m.covariance(k), kset, opts));
      step_[static_cast<size_t>(k)] = static_cast<int>(solvers_.size()) - 1;
    }
  }

  const PhiSolver& at(int k) const { return *solvers_[static_cast<size_t>(step_[static_cast<size_t>(k)])]; }
  int solver_id(int k) const { return step_[static_cast<size_t>(k)]; }
  std::size_t distinct() const { return solvers_.size(); }

 private:
  std::vector<std::shared_ptr<const PhiSolver>> solvers_;
  std::vector<int> step_;
};

/// phi_k = solve_phi(c_k, a_k, K_k) for each step; consecutive repeats of
/// (solver, drift) reuse the previous answer.
inline Matrix fraction_path(const Market& m, const DriftPath& drift, const PhiCache& cache) {
  require_same_dim(drift.cols(), m.n_steps(), "fraction_path steps");
  require_same_dim(drift.rows(), m.dim(), "fraction_path dim");
  Matrix phi(m.dim(), m.n_steps());
  int last_id = -1;
  for (int k = 0; k < m.n_steps(); ++k) {
    const int id = cache.solver_id(k);
    if (id == last_id && drift.col(k) == drift.col(k - 1)) {
      phi.col(k) = phi.col(k - 1);
      continue;
    }
    try {
      phi.col(k) = cache.at(k).solve(DriftVector(drift.col(k))).phi;
    } catch (const NonConvergence& e) {
      throw NonConvergence(std::string(e.what()) + " at step " + std::to_string(k));
    }
    last_id = id;
  }
  return phi;
}

/// Log-wealth of the fraction process phi, split relative to the base
/// market: dB = (<phi, c abar> - |phi|_c^2 / 2) dG, dL = <phi, dMbar>.
/// Summation runs forward in time.
inline WealthPath wealth_path(const Market& m, const PathBundle& p, const Matrix& phi) {
  const int n = m.n_steps();
  require_same_dim(phi.cols(), n, "wealth_path steps");
  const Vector abar = m.spec().base_drift + p.theta * m.spec().signal.direction;
  WealthPath w;
  w.B.resize(n + 1);
  w.L.resize(n + 1);
  w.log_wealth.resize(n + 1);
  w.B(0) = w.L(0) = w.log_wealth(0) = 0.0;
  for (int k = 0; k < n; ++k) {
    const Matrix& c = m.covariance(k).entries();
    const Vector cphi = c * phi.col(k);
    const double db = (cphi.dot(abar) - 0.5 * cphi.dot(phi.col(k))) * m.clock().at(k);
    const double dl = phi.col(k).dot(p.dM.col(k));
    w.B(k + 1) = w.B(k) + db;
    w.L(k + 1) = w.L(k) + dl;
    w.log_wealth(k + 1) = w.B(k + 1) + w.L(k + 1);
  }
  return w;
}

/// Numeraire of the market with drift `drift` and the cache's constraints.
inline WealthPath numeraire_path(const Market& m, const PathBundle& p, const DriftPath& drift, const PhiCache& cache,
                                 Matrix* phi_out = nullptr) {
  Matrix phi = fraction_path(m, drift, cache);
  WealthPath w = wealth_path(m, p, phi);
  if (phi_out != nullptr) *phi_out = std::move(phi);
  return w;
}

/// Growth rate <phi, c a> - |phi|_c^2 / 2 of the numeraire for drift a.
inline GrowthPath growth_path(const Market& m, const DriftPath& drift, const PhiCache& cache) {
  const Matrix phi = fraction_path(m, drift, cache);
  const int n = m.n_steps();
  GrowthPath g;
  g.rate.resize(n);
  g.cumulative.resize(n + 1);
  g.cumulative(0) = 0.0;
  for (int k = 0; k < n; ++k) {
    const Vector cphi = m.covariance(k).entries() * phi.col(k);
    g.rate(k) = cphi.dot(drift.col(k)) - 0.5 * cphi.dot(phi.col(k));
    g.cumulative(k + 1) = g.cumulative(k) + g.rate(k) * m.clock().at(k);
  }
  return g;
}

/// sup_t |X_t / Y_t - 1|.
inline double sup_relative_error(const WealthPath& x, const WealthPath& y) {
  if (x.log_wealth.size() != y.log_wealth.size()) throw GridMismatch("sup_relative_error: grid mismatch");
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.log_wealth.size(); ++k) {
    s = std::max(s, std::abs(std::expm1(x.log_wealth(k) - y.log_wealth(k))));
  }
  return s;
}

inline SemimartingaleDistance semimartingale_distance(const WealthPath& wn, const WealthPath& winf) {
  if (wn.B.size() != winf.B.size() || wn.L.size() != winf.L.size()) {
    throw GridMismatch("semimartingale_distance: wealth paths live on different grids");
  }
  SemimartingaleDistance d;
  for (Eigen::Index k = 1; k < wn.B.size(); ++k) {
    const double db = (wn.B(k) - wn.B(k - 1)) - (winf.B(k) - winf.B(k - 1));
    const double dl = (wn.L(k) - wn.L(k - 1)) - (winf.L(k) - winf.L(k - 1));
    d.fv_distance += std::abs(db);
    d.qv_distance += dl * dl;
  }
  d.sup_rel_error = sup_relative_error(wn, winf);
  return d;
}

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Monte Carlo E[X_T / Xhat_T] over paired paths.
inline MeanEstimate deflation_check(const std::vector<WealthPath>& x, const std::vector<WealthPath>& numeraire) {
  if (x.size() != numeraire.size() || x.empty()) throw InputError("deflation_check: need paired nonempty path sets");
  MeanEstimate e;
  e.count = x.size();
  double s = 0.0;
  double s2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = std::exp(x[i].log_wealth(x[i].log_wealth.size() - 1) -
                              numeraire[i].log_wealth(numeraire[i].log_wealth.size() - 1));
    s += r;
    s2 += r * r;
  }
  const double n = static_cast<double>(x.size());
  e.mean = s / n;
  const double var = n > 1 ? std::max(0.0, (s2 - n * e.mean * e.mean) / (n - 1)) : 0.0;
  e.std_error = std::sqrt(var / n);
  return e;
}

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Columns t, logX, B, L, g (g is the growth rate of the step starting at t;
/// empty on the last row).
inline void write_wealth_csv(std::ostream& os, const TimeGrid& grid, const WealthPath& w, const GrowthPath& g) {
  os << "t,logX,B,L,g\n";
  for (int k = 0; k <= grid.n_steps(); ++k) {
    os << format_double(grid.times[static_cast<size_t>(k)]) << ',' << format_double(w.log_wealth(k)) << ','
       << format_double(w.B(k)) << ',' << format_double(w.L(k)) << ',';
    if (k < grid.n_steps()) os << format_double(g.rate(k));
    os << '\n';
  }
}

}  // namespace numeraire
