#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "numeraire/numeraire.hpp"
#include "numeraire/statistics.hpp"

using namespace numeraire;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

MarketSpec base_spec(std::vector<ConstraintSet> k = {ConstraintSet::full_space()}) {
  MarketSpec s;
  s.dim = 2;
  s.grid = TimeGrid::uniform(1.0, 40);
  s.covariance = (Matrix(2, 2) << 0.7, 0.2, 0.2, 0.3).finished();
  s.base_drift = vec({0.8, -0.3});
  s.signal.direction = vec({0.5, 1.0});
  s.signal.prior_sd = 0.5;
  s.constraints = std::move(k);
  s.seed = 17;
  return s;
}

WealthPath from_b(const Vector& b) {
  WealthPath w;
  w.B = b;
  w.L = Vector::Zero(b.size());
  w.log_wealth = b;
  return w;
}

}  // namespace

TEST(NumerairePath, ZeroDrift) {
  Market m(base_spec());
  auto p = m.simulate_path(0);
  PhiCache cache(m);
  const WealthPath w = numeraire_path(m, p, DriftPath::Zero(2, m.n_steps()), cache);
  EXPECT_EQ(w.log_wealth.cwiseAbs().maxCoeff(), 0.0);
}

TEST(NumerairePath, FullSpaceGrowthIsHalfSquaredDrift) {
  Market m(base_spec());
  auto p = m.simulate_path(1);
  PhiCache cache(m);
  const DriftPath a = m.true_drift(p);
  const GrowthPath g = growth_path(m, a, cache);
  for (int k = 0; k < m.n_steps(); ++k) {
    const double half = 0.5 * a.col(k).dot(m.covariance(k).entries() * a.col(k));
    EXPECT_NEAR(g.rate(k), half, 1e-14);
  }
  const WealthPath w = numeraire_path(m, p, a, cache);
  EXPECT_NEAR(w.B(m.n_steps()), g.cumulative(m.n_steps()), 1e-13);
  for (int k = 0; k <= m.n_steps(); ++k) EXPECT_EQ(w.log_wealth(k), w.B(k) + w.L(k));
}

TEST(NumerairePath, OneDimensionalBox) {
  MarketSpec s;
  s.dim = 1;
  s.grid = TimeGrid::uniform(1.0, 10);
  s.covariance = Matrix::Identity(1, 1);
  const double mu = 0.6;
  s.base_drift = vec({mu});
  s.signal.prior_sd = 0.0;
  s.constraints = {ConstraintSet::box(vec({0.0}), vec({mu / 2}))};
  Market m(s);
  PhiCache cache(m);
  auto p = m.simulate_path(0);
  Matrix phi;
  numeraire_path(m, p, m.true_drift(p), cache, &phi);
  const GrowthPath g = growth_path(m, m.true_drift(p), cache);
  for (int k = 0; k < m.n_steps(); ++k) {
    EXPECT_NEAR(phi(0, k), mu / 2, 1e-12);
    EXPECT_NEAR(g.rate(k), mu * mu * 3.0 / 8.0, 1e-12);
  }
}

TEST(GrowthPath, TighterConstraintGrowsLess) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 1.5);
  for (int rep = 0; rep < 10; ++rep) {
    const double r = u(rng);
    Market wide(base_spec({ConstraintSet::ball(r)}));
    Market tight(base_spec({ConstraintSet::intersection({ConstraintSet::ball(r), ConstraintSet::orthant()})}));
    auto p = wide.simulate_path(static_cast<std::uint64_t>(rep));
    const DriftPath a = wide.true_drift(p);
    const GrowthPath gw = growth_path(wide, a, PhiCache(wide));
    const GrowthPath gt = growth_path(tight, a, PhiCache(tight));
    for (int k = 0; k < wide.n_steps(); ++k) {
      EXPECT_LE(gt.rate(k), gw.rate(k) + 1e-10);
      EXPECT_GE(gt.rate(k), -1e-12);
      EXPECT_LE(gw.rate(k), 0.5 * a.col(k).dot(wide.covariance(k).entries() * a.col(k)) + 1e-12);
    }
  }
}

TEST(Distance, Examples) {
  Market m(base_spec());
  auto p = m.simulate_path(2);
  PhiCache cache(m);
  const WealthPath w = numeraire_path(m, p, m.true_drift(p), cache);
  const auto z = semimartingale_distance(w, w);
  EXPECT_EQ(z.fv_distance, 0.0);
  EXPECT_EQ(z.qv_distance, 0.0);
  EXPECT_EQ(z.sup_rel_error, 0.0);

  for (int n : {1, 4, 10}) {
    Vector t = Vector::LinSpaced(101, 0.0, 1.0);
    const auto d = semimartingale_distance(from_b(t + t / n), from_b(t));
    EXPECT_NEAR(d.fv_distance, 1.0 / n, 1e-12);
    EXPECT_EQ(d.qv_distance, 0.0);
    EXPECT_NEAR(d.sup_rel_error, std::expm1(1.0 / n), 1e-12);
  }

  const WealthPath v = numeraire_path(m, p, DriftPath::Constant(2, m.n_steps(), 0.1), cache);
  const auto d = semimartingale_distance(v, w);
  double fv = 0, qv = 0;
  for (int k = 0; k < m.n_steps(); ++k) {
    fv += std::abs((v.B(k + 1) - v.B(k)) - (w.B(k + 1) - w.B(k)));
    qv += std::pow((v.L(k + 1) - v.L(k)) - (w.L(k + 1) - w.L(k)), 2);
  }
  EXPECT_NEAR(d.fv_distance, fv, 1e-12);
  EXPECT_NEAR(d.qv_distance, qv, 1e-12);

  WealthPath shorter = from_b(Vector::Zero(5));
  EXPECT_THROW(semimartingale_distance(shorter, w), GridMismatch);
}

TEST(Deflation, CashAndRandomStrategies) {
  auto spec = base_spec({ConstraintSet::ball(1.0)});
  Market m(spec);
  PhiCache cache(m);
  const std::size_t n = 10000;
  std::vector<WealthPath> num(n), cash(n), same(n), rand_x(n);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector f(2);
  do {
    f << u(rng), u(rng);
  } while (f.norm() > 1.0);
  const Matrix fixed = f.replicate(1, m.n_steps());
  for (std::size_t i = 0; i < n; ++i) {
    auto p = m.simulate_path(i);
    num[i] = numeraire_path(m, p, m.true_drift(p), cache);
    same[i] = num[i];
    cash[i] = wealth_path(m, p, Matrix::Zero(2, m.n_steps()));
    rand_x[i] = wealth_path(m, p, fixed);
  }
  const auto self = deflation_check(same, num);
  EXPECT_NEAR(self.mean, 1.0, 1e-15);
  const auto c = deflation_check(cash, num);
  EXPECT_LE(c.mean, 1.0 + 3 * c.std_error);
  const auto r = deflation_check(rand_x, num);
  EXPECT_LE(r.mean, 1.0 + 3 * r.std_error);
}

TEST(Csv, WealthColumns) {
  Market m(base_spec());
  auto p = m.simulate_path(0);
  PhiCache cache(m);
  const WealthPath w = numeraire_path(m, p, m.true_drift(p), cache);
  const GrowthPath g = growth_path(m, m.true_drift(p), cache);
  std::ostringstream os;
  write_wealth_csv(os, m.grid(), w, g);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,logX,B,L,g");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, m.n_steps() + 1);
}
