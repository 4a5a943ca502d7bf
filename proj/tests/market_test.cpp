#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "numeraire/market.hpp"
#include "numeraire/statistics.hpp"

using namespace numeraire;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

MarketSpec two_asset(std::uint64_t seed = 11) {
  MarketSpec s;
  s.dim = 2;
  s.grid = TimeGrid::uniform(1.0, 50);
  s.covariance = (Matrix(2, 2) << 0.6, 0.1, 0.1, 0.4).finished();
  s.base_drift = vec({0.2, -0.1});
  s.signal.direction = vec({1.0, 0.5});
  s.signal.prior_mean = 0.3;
  s.signal.prior_sd = 0.8;
  s.tilt.lambda = vec({0.7, -0.4});
  s.seed = seed;
  return s;
}

}  // namespace

TEST(TimeGrid, Validation) {
  EXPECT_THROW(TimeGrid({0.0, 0.5, 0.5}), InvalidSpec);
  EXPECT_THROW(TimeGrid({0.1, 0.5}), InvalidSpec);
  EXPECT_EQ(TimeGrid::uniform(2.0, 4).times.back(), 2.0);
}

TEST(Market, RejectsBadSpecs) {
  auto s = two_asset();
  s.signal.kind = "student";
  EXPECT_THROW(Market{s}, UnsupportedSignalModel);
  s = two_asset();
  s.tilt.lambda = vec({50, 0});
  EXPECT_THROW(Market{s}, InvalidSpec);
  s = two_asset();
  s.base_drift = vec({1, 2, 3});
  EXPECT_THROW(Market{s}, DimensionMismatch);
  s = two_asset();
  s.constraints = {ConstraintSet::ball(-1)};
  EXPECT_THROW(Market{s}, InvalidConstraint);
}

TEST(Market, ClockIsTraceNormalized) {
  auto s = two_asset();
  s.covariance_end = (Matrix(2, 2) << 2.0, 0.0, 0.0, 1.0).finished();
  Market m(s);
  EXPECT_NEAR(m.clock().total(), 1.0, 1e-12);
  for (int k = 0; k < m.n_steps(); ++k) EXPECT_NEAR(m.covariance(k).trace(), 1.0, 1e-12);
  EXPECT_NEAR(m.covariance(m.n_steps() - 1).entries()(0, 0), (0.6 * (1 - 0.98) + 2.0 / 3 * 0.98), 1e-12);
}

TEST(Market, ZeroDriftIsMartingale) {
  auto s = two_asset();
  s.base_drift = Vector::Zero(2);
  s.signal.direction = Vector::Zero(2);
  s.covariance = Matrix::Identity(2, 2) / 2.0;
  s.initial_price = vec({1.0, 2.0});
  Market m(s);
  auto paths = m.simulate_paths(4000, 2);
  for (int i = 0; i < 2; ++i) {
    std::vector<double> x;
    for (const auto& p : paths) x.push_back(p.S(i, m.n_steps()));
    EXPECT_LE(std::abs(mean_of(x) - s.initial_price(i)), 3 * stderr_of(x));
  }
}

TEST(Market, ConstantDriftMean) {
  MarketSpec s;
  s.dim = 1;
  s.grid = TimeGrid::uniform(2.0, 40);
  s.covariance = Matrix::Identity(1, 1);
  s.base_drift = vec({0.4});
  s.signal.prior_sd = 0.0;
  s.seed = 3;
  Market m(s);
  auto paths = m.simulate_paths(5000);
  std::vector<double> x;
  for (const auto& p : paths) x.push_back(p.S(0, m.n_steps()) - p.S(0, 0));
  EXPECT_LE(std::abs(mean_of(x) - 0.4 * 2.0), 3 * stderr_of(x));
}

TEST(Market, QuadraticVariationMatchesClock) {
  Market m(two_asset());
  auto paths = m.simulate_paths(3000);
  std::vector<double> qv;
  for (const auto& p : paths) {
    double s = 0.0;
    for (int k = 0; k < m.n_steps(); ++k) s += (p.S.col(k + 1) - p.S.col(k)).squaredNorm();
    qv.push_back(s);
  }
  // Drift adds O(dt) to the sum; tolerance covers it plus 3 standard errors.
  EXPECT_LE(std::abs(mean_of(qv) - m.clock().total()), 3 * stderr_of(qv) + 0.05);
}

TEST(Market, Deterministic) {
  Market m(two_asset(99));
  auto a = m.simulate_paths(20, 1);
  auto b = m.simulate_paths(20, 4);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].theta, b[i].theta);
    EXPECT_TRUE((a[i].S.array() == b[i].S.array()).all());
    EXPECT_TRUE((a[i].dM.array() == b[i].dM.array()).all());
  }
  Market other(two_asset(100));
  EXPECT_NE(other.simulate_path(0).theta, a[0].theta);
}

TEST(Filter, LimitingCases) {
  Market m(two_asset());
  auto p = m.simulate_path(5);
  auto none = m.filtered_drift(p, std::numeric_limits<double>::infinity());
  EXPECT_LT((none.col(0) - (m.spec().base_drift + 0.3 * m.spec().signal.direction)).norm(), 1e-14);
  auto full = m.filtered_drift(p, 0.0);
  EXPECT_LT((full - m.true_drift(p)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Filter, MatchesParticleFilter) {
  Market m(two_asset(21));
  const double sigma = 0.7;
  const auto& sp = m.spec();
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n01;
  for (std::uint64_t path : {0u, 1u, 2u}) {
    auto p = m.simulate_path(path);
    const FilterPath f = m.filter(p, sigma);
    const double y = p.theta + sigma * p.observation_noise;
    // Importance sampling from the prior with the exact Gaussian likelihood.
    const int n_particles = 100000;
    const int k = m.n_steps() / 2;
    std::vector<double> theta(n_particles), logw(n_particles);
    for (int i = 0; i < n_particles; ++i) {
      theta[i] = sp.signal.prior_mean + sp.signal.prior_sd * n01(rng);
      double lw = -0.5 * (y - theta[i]) * (y - theta[i]) / (sigma * sigma);
      for (int j = 0; j < k; ++j) {
        const Matrix& c = m.covariance(j).entries();
        const double dg = m.clock().at(j);
        const Vector resid = p.S.col(j + 1) - p.S.col(j) - c * (sp.base_drift + theta[i] * sp.signal.direction) * dg;
        lw -= 0.5 * resid.dot(c.ldlt().solve(resid)) / dg;
      }
      logw[i] = lw;
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    double sw = 0, swx = 0, swx2 = 0, sw2 = 0;
    for (int i = 0; i < n_particles; ++i) {
      const double w = std::exp(logw[i] - top);
      sw += w;
      sw2 += w * w;
      swx += w * theta[i];
      swx2 += w * theta[i] * theta[i];
    }
    const double mean = swx / sw;
    const double var = swx2 / sw - mean * mean;
    const double ess = sw * sw / sw2;
    const double se = std::sqrt(var / ess);
    EXPECT_LE(std::abs(f.mean(k) - mean), 3 * se + 1e-12) << "path " << path;
    EXPECT_NEAR(f.variance(k), var, 0.05 * var);
  }
}

TEST(Filter, ConvergesAsNoiseVanishes) {
  Market m(two_asset(8));
  double prev_drift = 1e300, prev_event = 1e300;
  std::vector<double> drift(6, 0.0), event(6, 0.0);
  for (std::uint64_t path = 0; path < 200; ++path) {
    auto p = m.simulate_path(path);
    const DriftPath lim = m.filtered_drift(p, 0.0);
    for (int n = 1; n <= 6; ++n) {
      const double s = std::pow(2.0, -n);
      drift[n - 1] += m.drift_distance_l1(m.filtered_drift(p, s), lim);
      event[n - 1] += m.event_probability_gap(p, s, 0.0, 0.3);
    }
  }
  for (int n = 0; n < 6; ++n) {
    EXPECT_LT(drift[n], prev_drift);
    EXPECT_LT(event[n], prev_event);
    prev_drift = drift[n];
    prev_event = event[n];
  }
}

TEST(Tilt, Examples) {
  Market m(two_asset());
  auto p = m.simulate_path(3);
  const auto z0 = m.tilt_density(p, 0.0);
  EXPECT_TRUE((z0.z.array() == 1.0).all());
  for (int k = 0; k < m.n_steps(); ++k) {
    EXPECT_NEAR((z0.lambda.col(k) - z0.z1(k) * m.spec().tilt.lambda).norm(), 0.0, 1e-12);
  }
  const auto z1 = m.tilt_density(p, 1.0);
  EXPECT_LT((z1.z - z1.z1).cwiseAbs().maxCoeff(), 1e-15);
  const auto zh = m.tilt_density(p, 0.5);
  // Direct recomputation of Z^1 from the increments.
  double log_z = 0.0;
  for (int k = 0; k <= m.n_steps(); ++k) {
    const double direct = 0.5 * 1.0 + 0.5 * std::exp(log_z);
    EXPECT_NEAR(zh.z(k), direct, 1e-12 * direct);
    EXPECT_NEAR(zh.exponential(k) * zh.orthogonal(k), zh.z1(k), 1e-10 * zh.z1(k));
    if (k == m.n_steps()) break;
    const Vector& lam = m.spec().tilt.lambda;
    log_z += lam.dot(p.dM.col(k)) - 0.5 * lam.dot(m.covariance(k).entries() * lam) * m.clock().at(k);
    EXPECT_NEAR((zh.lambda.col(k) * zh.z(k) - lam * zh.z1(k)).norm(), 0.0, 1e-10);
  }
}

TEST(Tilt, GirsanovDrift) {
  Market m(two_asset());
  auto p = m.simulate_path(4);
  EXPECT_LT((m.girsanov_drift(p, 0.0) - m.true_drift(p)).cwiseAbs().maxCoeff(), 1e-15);
  const auto z = m.tilt_density(p, 0.3);
  const auto a = m.girsanov_drift(p, 0.3);
  for (int k = 0; k < m.n_steps(); ++k) {
    const Vector expect = m.true_drift(p).col(k) + 0.3 * (z.z1(k) / (0.7 + 0.3 * z.z1(k))) * m.spec().tilt.lambda;
    EXPECT_LT((a.col(k) - expect).norm(), 1e-12);
  }
  auto s = two_asset();
  s.tilt.lambda = Vector::Zero(2);
  Market flat(s);
  auto q = flat.simulate_path(4);
  EXPECT_LT((flat.girsanov_drift(q, 0.6) - flat.true_drift(q)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Tilt, DensityIsMartingaleAndConvergesInL1) {
  auto s = two_asset();
  s.tilt.orthogonal = true;
  s.tilt.orthogonal_vol = 0.5;
  Market m(s);
  auto paths = m.simulate_paths(6000, 2);
  double prev = 1e300;
  for (double eps : {1.0, 0.5, 0.25, 0.125}) {
    std::vector<double> zt, dev;
    for (const auto& p : paths) {
      const auto z = m.tilt_density(p, eps);
      zt.push_back(z.z(m.n_steps()));
      dev.push_back(std::abs(z.z(m.n_steps()) - 1.0));
      EXPECT_EQ(z.floor_hits, 0);
    }
    EXPECT_LE(std::abs(mean_of(zt) - 1.0), 3 * stderr_of(zt));
    EXPECT_LT(mean_of(dev), prev);
    prev = mean_of(dev);
  }
}

TEST(FilteredTilt, ReducesToFullInformationTilt) {
  Market m(two_asset());
  auto p = m.simulate_path(6);
  const auto joint = m.filtered_tilt(p, 0.0, 0.4);
  const auto z = m.tilt_density(p, 0.4);
  EXPECT_LT((joint.z - z.z).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((joint.drift - m.girsanov_drift(p, 0.4)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FilteredTilt, ProjectionOfDensityMatchesSampling) {
  // U_t = E[Z^1_t | F^sigma_t]: average Z^1 over theta drawn from the posterior.
  Market m(two_asset(31));
  auto p = m.simulate_path(2);
  const double sigma = 0.5;
  const auto joint = m.filtered_tilt(p, sigma, 0.5);
  const auto f = m.filter(p, sigma);
  const auto& sp = m.spec();
  const int k = m.n_steps();
  double lam_x = 0.0, lam_g = 0.0, kappa = 0.0;
  for (int j = 0; j < k; ++j) {
    const Matrix& c = m.covariance(j).entries();
    const double dg = m.clock().at(j);
    lam_x += sp.tilt.lambda.dot(p.S.col(j + 1) - p.S.col(j) - c * sp.base_drift * dg);
    lam_g += sp.tilt.lambda.dot(c * sp.tilt.lambda) * dg;
    kappa += sp.tilt.lambda.dot(c * sp.signal.direction) * dg;
  }
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  std::vector<double> draws;
  for (int i = 0; i < 200000; ++i) {
    const double th = f.mean(k) + std::sqrt(f.variance(k)) * n01(rng);
    draws.push_back(std::exp(lam_x - th * kappa - 0.5 * lam_g));
  }
  EXPECT_LE(std::abs(mean_of(draws) - joint.u(k)), 3 * stderr_of(draws));
}
