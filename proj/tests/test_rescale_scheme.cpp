#include "nslb/rescale_scheme.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "generators.hpp"
#include "gtest/gtest.h"

namespace nslb {
namespace {

using testing::Gen;
using testing::kPropertyCases;

RescaleParams params(double t0, double T) {
  RescaleParams p;
  p.t0 = t0;
  p.T = T;
  return p;
}

TEST(RescaleParams, Validation) {
  RescaleParams p;
  EXPECT_NO_THROW(p.validate());
  p.r = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = RescaleParams{};
  p.m = 1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = RescaleParams{};
  p.T = 0.4;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = RescaleParams{};
  p.eps0 = 0.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(TimeMap, HandValues) {
  RescaleParams p = params(0.3, 1.0);
  EXPECT_EQ(s_of_t(0.3, p), 0.0);
  EXPECT_NEAR(s_of_t(0.8, p), 1.0 / std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(0.5 / std::sqrt(0.75), 0.57735, 1e-5);
  EXPECT_THROW(s_of_t(1.3, p), std::domain_error);
  EXPECT_THROW(s_of_t(0.2, p), std::domain_error);
  EXPECT_THROW(t_of_s(-0.1, p), std::domain_error);
}

TEST(TimeMapProperty, InversePairAndMonotone) {
  for (int seed = 0; seed < kPropertyCases; ++seed) {
    Gen gen(1200 + seed);
    RescaleParams p = params(gen.uniform(0.0, 5.0), 10.0);
    double u1 = gen.uniform(0.0, 0.5), u2 = gen.uniform(0.0, 0.5);
    double t1 = p.t0 + std::min(u1, u2), t2 = p.t0 + std::max(u1, u2) + 1e-6;
    EXPECT_NEAR(t_of_s(s_of_t(t1, p), p), t1, 1e-14 * (1.0 + p.t0));
    double s = gen.uniform(0.0, 1.0 / std::sqrt(3.0));
    EXPECT_NEAR(s_of_t(t_of_s(s, p), p), s, 1e-14);
    EXPECT_LT(s_of_t(t1, p), s_of_t(t2, p));
  }
}

TEST(MuOfS, HandValues) {
  RescaleParams p = params(0.0, 1.0);
  CoeffAudit a = mu_of_s(0.0, p);
  EXPECT_NEAR(a.mu, 1.0, 1e-15);
  EXPECT_NEAR(a.lower_bound, 3.0 * std::sqrt(3.0) / 16.0, 1e-15);
  EXPECT_NEAR(a.lower_bound, 0.3248, 1e-4);
  ASSERT_EQ(a.mu_tau_k.size(), 2u);
  EXPECT_NEAR(a.mu_tau_k[1], 1.0, 1e-15);
  EXPECT_LE(a.scaled_mu_tau_k[1], a.upper_bound);
  EXPECT_TRUE(a.lower_ok && a.upper_ok);
  // At the window end u = 1/2: mu = (3/4)^{3/2} / (1 + t0 + 1/2).
  CoeffAudit end = mu_of_s(1.0 / std::sqrt(3.0), p);
  EXPECT_NEAR(end.mu, std::pow(0.75, 1.5) / 1.5, 1e-14);
}

TEST(MuOfSProperty, BoundsHoldOnDenseSweeps) {
  for (double T : {0.5, 1.0, 2.0}) {
    RescaleParams p = params(0.0, T);
    p.r = 1.0 / 256.0;
    const int points = 1000;
    for (int i = 0; i <= points; ++i) {
      double s = (1.0 / std::sqrt(3.0)) * i / points;
      CoeffAudit a = mu_of_s(s, p);
      EXPECT_GE(a.mu, a.lower_bound * (1.0 - 1e-12)) << T << " " << s;
      for (double v : a.scaled_mu_tau_k) EXPECT_LE(v, a.upper_bound * (1.0 + 1e-12)) << T << " " << s;
    }
  }
}

TEST(RPolicy, HandValuesAndMonotonicity) {
  RescaleParams p = params(0.0, 1.0);
  p.C_m = 1.0;
  EXPECT_NEAR(r_policy(p), 1.0 / 256.0, 1e-18);
  RescaleParams longer = p;
  longer.T = 3.0;  // 1 + T doubles
  EXPECT_NEAR(r_policy(longer), r_policy(p) / 2.0, 1e-18);
  RescaleParams bigger = p;
  bigger.C_m = 2.0;
  EXPECT_LT(r_policy(bigger), r_policy(p));
}

TEST(GrowthExponent, HandValuesAndGrid) {
  EXPECT_NEAR(growth_exponent(0.5, 0.0), 1.5, 1e-15);
  EXPECT_NEAR(growth_exponent(0.3, 0.0), 1.3, 1e-15);
  EXPECT_NEAR(growth_exponent(0.9, 0.1), 1.72, 1e-15);
  for (int i = 1; i < 100; ++i)
    for (int j = 0; j <= 40; ++j) EXPECT_GT(growth_exponent(i / 100.0, j / 100.0), 1.0);
  EXPECT_THROW(growth_exponent(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(growth_exponent(0.5, 0.5), std::invalid_argument);
}

TEST(ComparisonValue, ReconstructsTheFieldAfterUndoingTheFactor) {
  auto v = [](double t, std::span<const double> x) {
    return std::vector<double>{std::sin(x[0] + t) * std::exp(-t), x[0] * x[1] - t * t};
  };
  for (int seed = 0; seed < kPropertyCases; ++seed) {
    Gen gen(1300 + seed);
    RescaleParams p = params(gen.uniform(0.0, 2.0), 5.0);
    p.r = gen.uniform(0.01, 1.0);
    double s = gen.uniform(0.0, 1.0 / std::sqrt(3.0));
    std::vector<double> y = gen.point(2, -1.0, 1.0);
    std::vector<double> u = comparison_value(v, p, s, y);
    double t = t_of_s(s, p);
    std::vector<double> x = {y[0] / p.r, y[1] / p.r};
    std::vector<double> direct = v(t, x);
    for (int i = 0; i < 2; ++i) EXPECT_NEAR((1.0 + t) * u[i], direct[i], 1e-12 * std::max(1.0, std::abs(direct[i])));
  }
}

TEST(RegularityProxy, SingleModeByHand) {
  // v = sin(2 pi x1): H^2 norm sqrt(2 * (1/2)^2 * 4), grid maxima 1, 2 pi, 2 pi, (2 pi)^2 and zeros.
  TorusGrid g(2, 16);
  SpectralField v = to_modes(testing::sample(g, 1, [](const std::vector<double>& x, int) {
    return std::sin(2.0 * std::numbers::pi * x[0]);
  }));
  const double k = 2.0 * std::numbers::pi;
  double expected = std::sqrt(2.0 * 0.25 * 4.0) + 1.0 + k + k * k;
  EXPECT_NEAR(regularity_proxy(v, 2), expected, 1e-10);
}

TEST(IncrementCheck, ZeroDataHasZeroIncrements) {
  TorusGrid g(2, 16);
  SolverConfig cfg;
  cfg.nu = 0.05;
  cfg.dt = 1e-3;
  IncrementReport r = increment_bound_check(SpectralField(g, 2), cfg, RescaleParams{});
  for (double inc : r.increments) EXPECT_EQ(inc, 0.0);
  EXPECT_TRUE(r.increments_vanish);
  EXPECT_FALSE(r.slope_ok);
}

TEST(IncrementCheck, TaylorGreenIncrementsVanish) {
  // The advection of Taylor-Green is a gradient, so the solution is exactly the heat flow.
  TorusGrid g(2, 16);
  SolverConfig cfg;
  cfg.nu = 0.05;
  cfg.dt = 1e-3;
  RescaleParams p;
  p.delta = 0.5;
  IncrementReport r = increment_bound_check(taylor_green(g, 1.0), cfg, p);
  EXPECT_TRUE(r.increments_vanish);
  EXPECT_NEAR(r.predicted_exponent, 1.5, 1e-15);
  EXPECT_GT(r.reference_norm, 0.0);
}

TEST(IncrementCheck, GenericDataGivesRoughlyLinearIncrements) {
  // Generic data: v(D) - heat(D) ~ D * P[(v.grad)v], so the slope sits near one once
  // the ladder is short against the viscous time of the dealiased band. At nu = 0.05 the
  // top modes decay within one step and the fitted slope drops to about 0.6.
  Gen gen(1400);
  TorusGrid g(2, 16);
  SpectralField v0 = gen.solenoidal(g, 3);
  v0 *= 0.1 / sobolev_norm(v0, 0.0);
  SolverConfig cfg;
  cfg.nu = 0.005;
  cfg.dt = 5e-4;
  IncrementReport r = increment_bound_check(v0, cfg, RescaleParams{});
  ASSERT_FALSE(r.increments_vanish);
  ASSERT_EQ(r.increments.size(), 3u);
  for (std::size_t i = 1; i < r.increments.size(); ++i) EXPECT_LT(r.increments[i], r.increments[i - 1]);
  EXPECT_NEAR(r.slope, 1.0, 0.1);
}

TEST(IncrementCheck, RejectsUnstableRunsAndShortLadders) {
  TorusGrid g(2, 16);
  SolverConfig cfg;
  cfg.nu = 0.05;
  cfg.dt = 1e-3;
  cfg.blowup_threshold = 0.1;
  EXPECT_THROW(increment_bound_check(taylor_green(g, 1.0), cfg, RescaleParams{}), std::runtime_error);
  cfg.blowup_threshold = 1e12;
  EXPECT_THROW(increment_bound_check(taylor_green(g, 1.0), cfg, RescaleParams{}, {0.01}), std::invalid_argument);
}

}  // namespace
}  // namespace nslb
