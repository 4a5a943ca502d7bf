#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "numeraire/errors.hpp"
#include "numeraire/rng.hpp"

namespace numeraire {

inline double mean_of(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double stderr_of(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(n - 1) / static_cast<double>(n));
}

// Linear interpolation between order statistics (type 7).
inline double quantile_of(std::vector<double> x, double q) {
  if (x.empty()) return 0.0;
  std::sort(x.begin(), x.end());
  const double h = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline constexpr double kLogFloor = 1e-300;

/// Least-squares slope of log y on log x. Zeros are floored so an exact
/// zero reads as a very steep decay instead of a NaN.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("loglog_slope: need two or more paired points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(std::max(y[i], kLogFloor));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = sxx - sx * sx / n;
  if (!(den > 0.0)) throw InputError("loglog_slope: abscissae must not all coincide");
  return (sxy - sx * sy / n) / den;
}

struct SlopeEstimate {
  double slope = 0.0;
  double lower = 0.0;  // 2.5% bootstrap quantile
  double upper = 0.0;  // 97.5% bootstrap quantile
  bool negative() const { return upper < 0.0; }
};

/// Slope of log(mean over paths) against log(x) with a path bootstrap.
/// samples[i][p] is the metric at ladder point i on path p; resampling
/// picks whole paths so the ladder coupling is kept.
inline SlopeEstimate bootstrap_slope(const std::vector<double>& x, const std::vector<std::vector<double>>& samples,
                                     int resamples = 1000, std::uint64_t seed = 12345) {
  if (samples.size() != x.size() || samples.empty()) throw InputError("bootstrap_slope: shape mismatch");
  const std::size_t n_paths = samples.front().size();
  for (const auto& s : samples) {
    if (s.size() != n_paths || s.empty()) throw InputError("bootstrap_slope: ragged samples");
  }
  SlopeEstimate est;
  std::vector<double> means(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) means[i] = mean_of(samples[i]);
  est.slope = loglog_slope(x, means);

  auto eng = path_engine(seed, 0);
  std::vector<double> slopes;
  slopes.reserve(static_cast<std::size_t>(resamples));
  std::vector<std::size_t> pick(n_paths);
  for (int b = 0; b < resamples; ++b) {
    for (auto& p : pick) p = static_cast<std::size_t>(eng() % n_paths);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double s = 0.0;
      for (std::size_t p : pick) s += samples[i][p];
      means[i] = s / static_cast<double>(n_paths);
    }
    slopes.push_back(loglog_slope(x, means));
  }
  std::sort(slopes.begin(), slopes.end());
  est.lower = sorted_quantile(slopes, 0.025);
  est.upper = sorted_quantile(slopes, 0.975);
  return est;
}

}  // namespace numeraire
