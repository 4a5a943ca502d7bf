#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "numeraire/constraint_set.hpp"
#include "numeraire/errors.hpp"
#include "numeraire/linalg.hpp"
#include "numeraire/parallel.hpp"
#include "numeraire/rng.hpp"

namespace numeraire {

struct TimeGrid {
  std::vector<double> times;

  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> t) : times(std::move(t)) { validate(); }

  static TimeGrid uniform(double horizon, int n_steps) {
    if (!(horizon > 0.0) || n_steps < 1) throw InvalidSpec("TimeGrid: horizon and step count must be positive");
    std::vector<double> t(static_cast<size_t>(n_steps) + 1);
    for (int k = 0; k <= n_steps; ++k) t[static_cast<size_t>(k)] = horizon * k / n_steps;
    return TimeGrid(std::move(t));
  }

  void validate() const {
    if (times.size() < 2 || times.front() != 0.0) throw InvalidSpec("TimeGrid: must start at 0 with at least one step");
    for (size_t k = 1; k < times.size(); ++k) {
      if (!(times[k] > times[k - 1])) throw InvalidSpec("TimeGrid: times must be strictly increasing");
    }
  }

  int n_steps() const { return static_cast<int>(times.size()) - 1; }
  double horizon() const { return times.back(); }
  double dt(int k) const { return times[static_cast<size_t>(k) + 1] - times[static_cast<size_t>(k)]; }
  bool operator==(const TimeGrid& o) const { return times == o.times; }
};

// Increments of G = trace[S, S]; with unit-trace covariance these are the
// time steps themselves.
struct Clock {
  std::vector<double> increments;

  double total() const {
    double s = 0.0;
    for (double x : increments) s += x;
    return s;
  }
  double at(int k) const { return increments[static_cast<size_t>(k)]; }
};

// Drift under the base market is b + theta v, theta ~ N(prior_mean, prior_sd^2)
// drawn once per path. Filtration n sees Y = theta + sigma_n xi (xi shared by
// all n on a path) and the running path of S.
struct SignalModel {
  std::string kind = "gaussian";
  Vector direction;
  double prior_mean = 0.0;
  double prior_sd = 1.0;
  // Observation noise of the limit filtration; 0 reveals theta.
  double limit_noise = 0.0;
};

// dP1/dPbar = E(int lambda1 dMbar) times, optionally, E(kappa W_perp) for a
// Brownian motion W_perp independent of everything else.
struct TiltModel {
  Vector lambda;
  bool orthogonal = false;
  double orthogonal_vol = 0.0;
  // Cap on int |lambda1|_c^2 dG (plus kappa^2 T with the orthogonal factor).
  double novikov_cap = 25.0;
};

struct MarketSpec {
  Eigen::Index dim = 1;
  TimeGrid grid = TimeGrid::uniform(1.0, 100);
  Matrix covariance;                   // rescaled to unit trace
  std::optional<Matrix> covariance_end;  // linear interpolation in t when set
  Vector base_drift;                   // b
  Vector initial_price;                // S_0
  SignalModel signal;
  TiltModel tilt;
  // One set for all steps, or one per step.
  std::vector<ConstraintSet> constraints = {ConstraintSet::full_space()};
  std::uint64_t seed = 0;
};

// Per-path draws and the asset path. Everything else is a deterministic
// function of these and the MarketSpec.
struct PathBundle {
  std::uint64_t index = 0;
  double theta = 0.0;
  double observation_noise = 0.0;  // xi in Y = theta + sigma xi
  Matrix S;                        // d x (N+1)
  Matrix dM;                       // d x N, martingale increments under the base market
  Vector dW_perp;                  // N, drives the orthogonal factor
};

// Drift values on each step [t_k, t_{k+1}), evaluated at t_k: d x N.
using DriftPath = Matrix;

struct DensityDecomposition {
  Matrix lambda;             // lambda^eps, d x N (predictable)
  Vector exponential;        // E(int lambda1 dM), N+1
  Vector orthogonal;         // N^eps factor, N+1 (ones when off)
  Vector z1;                 // Z^1, N+1
  Vector z;                  // Z^eps, N+1
  int floor_hits = 0;
};

// Posterior of theta given F^sigma_{t_k}, k = 0..N.
struct FilterPath {
  Vector mean;
  Vector variance;
};

// Market and density of a joint (filtration, probability) perturbation,
// all relative to the base market.
struct FilteredTilt {
  DriftPath tilde_drift;  // drift under (F^sigma, Pbar)
  DriftPath drift;        // drift under (F^sigma, P^eps)
  Vector z;               // density of P^eps on F^sigma, N+1
  Vector u;               // E[Z^1_t | F^sigma_t], N+1
  int floor_hits = 0;
};

inline constexpr double kDensityFloor = 1e-12;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Validated market with per-step quantities precomputed.
class Market {
 public:
  explicit Market(MarketSpec spec) : spec_(std::move(spec)) {
    const auto d = spec_.dim;
    if (d < 1) throw InvalidSpec("market dimension must be positive");
    spec_.grid.validate();
    const int n = spec_.grid.n_steps();
    if (spec_.covariance.rows() != d || spec_.covariance.cols() != d) {
      throw DimensionMismatch("covariance must be " + std::to_string(d) + "x" + std::to_string(d));
    }
    if (spec_.base_drift.size() == 0) spec_.base_drift = Vector::Zero(d);
    if (spec_.initial_price.size() == 0) spec_.initial_price = Vector::Zero(d);
    if (spec_.signal.direction.size() == 0) spec_.signal.direction = Vector::Zero(d);
    if (spec_.tilt.lambda.size() == 0) spec_.tilt.lambda = Vector::Zero(d);
    require_same_dim(spec_.base_drift.size(), d, "base drift");
    require_same_dim(spec_.initial_price.size(), d, "initial price");
    require_same_dim(spec_.signal.direction.size(), d, "signal direction");
    require_same_dim(spec_.tilt.lambda.size(), d, "tilt");
    if (!spec_.base_drift.allFinite() || !spec_.signal.direction.allFinite() || !spec_.tilt.lambda.allFinite() ||
        !spec_.initial_price.allFinite()) {
      throw InvalidSpec("market vectors must be finite");
    }
    if (spec_.signal.kind != "gaussian") {
      throw UnsupportedSignalModel("signal model '" + spec_.signal.kind + "' is not supported");
    }
    if (!(spec_.signal.prior_sd >= 0.0) || !std::isfinite(spec_.signal.prior_sd) ||
        !std::isfinite(spec_.signal.prior_mean)) {
      throw InvalidSpec("signal prior must have finite mean and nonnegative sd");
    }
    if (!(spec_.signal.limit_noise >= 0.0)) throw InvalidSpec("limit noise must be nonnegative");
    if (!std::isfinite(spec_.tilt.orthogonal_vol)) throw InvalidSpec("orthogonal volatility must be finite");

    const PsdMatrix c0 = PsdMatrix::clock_normalized(spec_.covariance);
    std::optional<PsdMatrix> c1;
    if (spec_.covariance_end) {
      if (spec_.covariance_end->rows() != d || spec_.covariance_end->cols() != d) {
        throw DimensionMismatch("covariance_end must be " + std::to_string(d) + "x" + std::to_string(d));
      }
      c1 = PsdMatrix::clock_normalized(*spec_.covariance_end);
    }
    cov_.reserve(static_cast<size_t>(n));
    sqrt_cov_.reserve(static_cast<size_t>(n));
    const Matrix root0 = c0.sqrt();
    for (int k = 0; k < n; ++k) {
      if (c1) {
        const double w = spec_.grid.times[static_cast<size_t>(k)] / spec_.grid.horizon();
        cov_.push_back(PsdMatrix::clock_normalized((1.0 - w) * c0.entries() + w * c1->entries()));
        sqrt_cov_.push_back(cov_.back().sqrt());
      } else {
        cov_.push_back(c0);
        sqrt_cov_.push_back(root0);
      }
      clock_.increments.push_back(cov_.back().trace() * spec_.grid.dt(k));
    }
    constant_covariance_ = !c1.has_value();

    if (spec_.constraints.empty()) throw InvalidSpec("constraint process is empty");
    if (spec_.constraints.size() != 1 && spec_.constraints.size() != static_cast<size_t>(n)) {
      throw InvalidSpec("constraint process must have one set or one per step");
    }
    for (const auto& k : spec_.constraints) k.validate(d);

    const Vector& v = spec_.signal.direction;
    const Vector& b = spec_.base_drift;
    const Vector& lam = spec_.tilt.lambda;
    double novikov = 0.0;
    for (int k = 0; k < n; ++k) {
      const Matrix& c = cov_[static_cast<size_t>(k)].entries();
      const double dg = clock_.at(k);
      info_.push_back(v.dot(c * v) * dg);
      cb_dg_.push_back(c * b * dg);
      lam_c_lam_.push_back(lam.dot(c * lam));
      lam_c_v_dg_.push_back(lam.dot(c * v) * dg);
      novikov += lam_c_lam_.back() * dg;
    }
    if (spec_.tilt.orthogonal) novikov += spec_.tilt.orthogonal_vol * spec_.tilt.orthogonal_vol * spec_.grid.horizon();
    if (novikov > spec_.tilt.novikov_cap) {
      throw InvalidSpec("tilt intensity " + std::to_string(novikov) + " exceeds the configured cap " +
                        std::to_string(spec_.tilt.novikov_cap));
    }
    novikov_ = novikov;
  }

  const MarketSpec& spec() const { return spec_; }
  Eigen::Index dim() const { return spec_.dim; }
  int n_steps() const { return spec_.grid.n_steps(); }
  const TimeGrid& grid() const { return spec_.grid; }
  const Clock& clock() const { return clock_; }
  const PsdMatrix& covariance(int k) const { return cov_[static_cast<size_t>(k)]; }
  bool constant_covariance() const { return constant_covariance_; }
  const ConstraintSet& constraint(int k) const {
    return spec_.constraints.size() == 1 ? spec_.constraints.front() : spec_.constraints[static_cast<size_t>(k)];
  }
  bool constant_constraint() const { return spec_.constraints.size() == 1; }
  double tilt_intensity() const { return novikov_; }

  /// Euler step dS = c abar dG + sqrt(c) sqrt(dG) xi with abar = b + theta v.
  PathBundle simulate_path(std::uint64_t index) const {
    const auto d = dim();
    const int n = n_steps();
    auto eng = path_engine(spec_.seed, index);
    Normal normal;
    PathBundle p;
    p.index = index;
    p.theta = spec_.signal.prior_mean + spec_.signal.prior_sd * normal(eng);
    p.observation_noise = normal(eng);
    p.S.resize(d, n + 1);
    p.dM.resize(d, n);
    p.dW_perp.resize(n);
    p.S.col(0) = spec_.initial_price;
    Vector xi(d);
    const Vector abar = spec_.base_drift + p.theta * spec_.signal.direction;
    for (int k = 0; k < n; ++k) {
      for (Eigen::Index i = 0; i < d; ++i) xi(i) = normal(eng);
      p.dW_perp(k) = std::sqrt(spec_.grid.dt(k)) * normal(eng);
      const double dg = clock_.at(k);
      p.dM.col(k) = sqrt_cov_[static_cast<size_t>(k)] * xi * std::sqrt(dg);
      p.S.col(k + 1) = p.S.col(k) + cov_[static_cast<size_t>(k)].entries() * abar * dg + p.dM.col(k);
    }
    return p;
  }

  std::vector<PathBundle> simulate_paths(std::size_t n_paths, int threads = 1, std::uint64_t first = 0) const {
    if (n_paths == 0) throw InvalidSpec("simulate_paths: path count must be positive");
    std::vector<PathBundle> out(n_paths);
    parallel_for(n_paths, threads, [&](std::size_t i) { out[i] = simulate_path(first + i); });
    return out;
  }

  /// abar = b + theta v, the drift under (Fbar, Pbar).
  DriftPath true_drift(const PathBundle& p) const {
    const Vector a = spec_.base_drift + p.theta * spec_.signal.direction;
    return a.replicate(1, n_steps());
  }

  /// Kalman posterior of theta given Y = theta + sigma xi and S up to t_k.
  /// sigma = +inf drops the observation, sigma = 0 reveals theta.
  FilterPath filter(const PathBundle& p, double sigma) const {
    if (!(sigma >= 0.0)) throw InvalidSpec("observation noise must be nonnegative");
    const int n = n_steps();
    FilterPath f;
    f.mean.resize(n + 1);
    f.variance.resize(n + 1);
    const double s0 = spec_.signal.prior_sd;
    if (sigma == 0.0 || s0 == 0.0) {
      f.mean.setConstant(p.theta);
      f.variance.setZero();
      return f;
    }
    double precision = 1.0 / (s0 * s0);
    double numerator = spec_.signal.prior_mean / (s0 * s0);
    if (std::isfinite(sigma)) {
      const double y = p.theta + sigma * p.observation_noise;
      precision += 1.0 / (sigma * sigma);
      numerator += y / (sigma * sigma);
    }
    const Vector& v = spec_.signal.direction;
    for (int k = 0; k <= n; ++k) {
      f.mean(k) = numerator / precision;
      f.variance(k) = 1.0 / precision;
      if (k == n) break;
      const Vector ds = p.S.col(k + 1) - p.S.col(k);
      precision += info_[static_cast<size_t>(k)];
      numerator += v.dot(ds - cb_dg_[static_cast<size_t>(k)]);
    }
    return f;
  }

  /// Drift under (F^sigma, Pbar): b + E[theta | F^sigma_{t_k}] v.
  DriftPath filtered_drift(const PathBundle& p, double sigma) const {
    const FilterPath f = filter(p, sigma);
    DriftPath a(dim(), n_steps());
    for (int k = 0; k < n_steps(); ++k) a.col(k) = spec_.base_drift + f.mean(k) * spec_.signal.direction;
    return a;
  }

  /// int |P[theta > q | F^sigma] - P[theta > q | F^limit]| dG along the path.
  double event_probability_gap(const PathBundle& p, double sigma, double sigma_limit, double q) const {
    const FilterPath a = filter(p, sigma);
    const FilterPath b = filter(p, sigma_limit);
    auto prob = [&](const FilterPath& f, int k) {
      const double var = f.variance(k);
      if (var == 0.0) return f.mean(k) > q ? 1.0 : 0.0;
      return normal_cdf((f.mean(k) - q) / std::sqrt(var));
    };
    double gap = 0.0;
    for (int k = 0; k < n_steps(); ++k) gap += std::abs(prob(a, k) - prob(b, k)) * clock_.at(k);
    return gap;
  }

  /// Z^eps = (1 - eps) + eps Z^1 with its factors and lambda^eps = (Z^1/Z^eps) lambda1.
  DensityDecomposition tilt_density(const PathBundle& p, double eps) const {
    if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidSpec("tilt size must lie in [0, 1]");
    const int n = n_steps();
    const Vector& lam = spec_.tilt.lambda;
    const double kappa = spec_.tilt.orthogonal ? spec_.tilt.orthogonal_vol : 0.0;
    DensityDecomposition out;
    out.lambda.resize(dim(), n);
    out.exponential.resize(n + 1);
    out.orthogonal.resize(n + 1);
    out.z1.resize(n + 1);
    out.z.resize(n + 1);
    double log_e = 0.0;
    double log_n = 0.0;
    for (int k = 0; k <= n; ++k) {
      out.exponential(k) = std::exp(log_e);
      out.orthogonal(k) = std::exp(log_n);
      double z1 = out.exponential(k) * out.orthogonal(k);
      if (z1 < kDensityFloor) {
        z1 = kDensityFloor;
        ++out.floor_hits;
      }
      out.z1(k) = z1;
      out.z(k) = (1.0 - eps) + eps * z1;
      if (k == n) break;
      out.lambda.col(k) = (z1 / out.z(k)) * lam;
      log_e += lam.dot(p.dM.col(k)) - 0.5 * lam_c_lam_[static_cast<size_t>(k)] * clock_.at(k);
      if (kappa != 0.0) log_n += kappa * p.dW_perp(k) - 0.5 * kappa * kappa * spec_.grid.dt(k);
    }
    return out;
  }

  /// a^eps = abar + eps lambda^eps.
  DriftPath girsanov_drift(const PathBundle& p, double eps) const {
    return girsanov_drift(p, eps, tilt_density(p, eps));
  }
  DriftPath girsanov_drift(const PathBundle& p, double eps, const DensityDecomposition& z) const {
    return true_drift(p) + eps * z.lambda;
  }

  /// Joint perturbation: filtration F^sigma and probability P^eps. With
  /// U = E[Z^1 | F^sigma] in closed form, the density on F^sigma is
  /// (1 - eps) + eps U and the drift picks up eps (U/Z)(lambda1 - kappa s^2 v),
  /// kappa_t = int lambda1' c v dG being the exposure of log Z^1 to theta.
  FilteredTilt filtered_tilt(const PathBundle& p, double sigma, double eps) const {
    if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidSpec("tilt size must lie in [0, 1]");
    const int n = n_steps();
    const FilterPath f = filter(p, sigma);
    const Vector& lam = spec_.tilt.lambda;
    const Vector& v = spec_.signal.direction;
    const double kappa_perp = spec_.tilt.orthogonal ? spec_.tilt.orthogonal_vol : 0.0;
    FilteredTilt out;
    out.tilde_drift.resize(dim(), n);
    out.drift.resize(dim(), n);
    out.z.resize(n + 1);
    out.u.resize(n + 1);
    double lam_x = 0.0;   // lambda1' (S_t - S_0 - int c b dG)
    double lam_g = 0.0;   // int |lambda1|_c^2 dG
    double kappa = 0.0;   // int lambda1' c v dG
    double log_n = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double m = f.mean(k);
      const double s2 = f.variance(k);
      double u = std::exp(lam_x - 0.5 * lam_g - kappa * m + 0.5 * kappa * kappa * s2 + log_n);
      if (u < kDensityFloor) {
        u = kDensityFloor;
        ++out.floor_hits;
      }
      out.u(k) = u;
      out.z(k) = (1.0 - eps) + eps * u;
      if (k == n) break;
      out.tilde_drift.col(k) = spec_.base_drift + m * v;
      out.drift.col(k) = out.tilde_drift.col(k) + eps * (u / out.z(k)) * (lam - kappa * s2 * v);
      const Vector ds = p.S.col(k + 1) - p.S.col(k);
      lam_x += lam.dot(ds - cb_dg_[static_cast<size_t>(k)]);
      lam_g += lam_c_lam_[static_cast<size_t>(k)] * clock_.at(k);
      kappa += lam_c_v_dg_[static_cast<size_t>(k)];
      if (kappa_perp != 0.0) log_n += kappa_perp * p.dW_perp(k) - 0.5 * kappa_perp * kappa_perp * spec_.grid.dt(k);
    }
    return out;
  }

  /// sum_k |a_k - b_k|^2_{c_k} dG_k.
  double drift_distance(const DriftPath& a, const DriftPath& b) const {
    double s = 0.0;
    for (int k = 0; k < n_steps(); ++k) {
      const Vector diff = a.col(k) - b.col(k);
      s += diff.dot(cov_[static_cast<size_t>(k)].entries() * diff) * clock_.at(k);
    }
    return s;
  }

  /// sum_k |c_k (a_k - b_k)| dG_k.
  double drift_distance_l1(const DriftPath& a, const DriftPath& b) const {
    double s = 0.0;
    for (int k = 0; k < n_steps(); ++k) {
      s += (cov_[static_cast<size_t>(k)].entries() * (a.col(k) - b.col(k))).norm() * clock_.at(k);
    }
    return s;
  }

 private:
  MarketSpec spec_;
  std::vector<PsdMatrix> cov_;
  std::vector<Matrix> sqrt_cov_;
  Clock clock_;
  bool constant_covariance_ = true;
  std::vector<double> info_;        // v' c v dG
  std::vector<Vector> cb_dg_;       // c b dG
  std::vector<double> lam_c_lam_;   // |lambda1|_c^2
  std::vector<double> lam_c_v_dg_;  // lambda1' c v dG
  double novikov_ = 0.0;
};

}  // namespace numeraire
