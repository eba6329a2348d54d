#include <cmath>
#include <random>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "drawdown_tax/optimal_tax.hpp"

using namespace drawdown_tax;
using boost::math::quadrature::gauss_kronrod;

namespace {

const ScaleFunction& reference_sf() {
  static const ScaleFunction sf(BrownianDrift{0.03, 0.4}, 0.01);
  return sf;
}

const SolveReport& report(double k, double d) {
  static const SolveReport a = solve(reference_sf(), LinearDrawdown{0.1, 1.0}, 0.2, 0.6);
  static const SolveReport b = solve(reference_sf(), LinearDrawdown{-1.0, 1.0}, 0.2, 0.6);
  static const SolveReport c = solve(reference_sf(), LinearDrawdown{0.0, 0.0}, 0.2, 0.6);
  if (k == 0.1 && d == 1.0) return a;
  if (k == -1.0 && d == 1.0) return b;
  return c;
}

double bisect_phi() {
  double lo = 0.0;
  double hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.03 * mid + 0.08 * mid * mid < 0.01 ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

TEST(Solve, CaseTwoForSlopePointOne) {
  const auto& r = report(0.1, 1.0);
  EXPECT_EQ(r.case_label, CaseLabel::II);
  EXPECT_FALSE(r.switch_point.has_value());
  EXPECT_TRUE(r.gamma_star.is_constant());
  EXPECT_EQ(r.gamma_star(0.5), 0.6);
  EXPECT_EQ(r.gamma_star(50.0), 0.6);
  for (double x : probe_grid(r.probe_start, r.x0, 64)) EXPECT_GE(G2(r.sf, r.f, 0.6, x), -1e-10) << x;
}

TEST(Solve, CaseFiveForNegativeSlope) {
  const auto& r = report(-1.0, 1.0);
  ASSERT_EQ(r.case_label, CaseLabel::V);
  ASSERT_TRUE(r.switch_point.has_value());
  const double x1 = *r.switch_point;
  EXPECT_GT(x1, 0.0);
  EXPECT_LE(x1, 1.443);
  EXPECT_LT(std::abs(G2(r.sf, r.f, 0.6, x1)), 1e-8);
  EXPECT_EQ(r.gamma_star(0.5 * x1), 0.2);
  EXPECT_EQ(r.gamma_star(x1), 0.6);
  // G2 < 0 on (0, x1), >= 0 on [x1, x0].
  EXPECT_LT(G2(r.sf, r.f, 0.6, 0.5 * x1), 0.0);
  EXPECT_GE(G2(r.sf, r.f, 0.6, 0.5 * (x1 + r.x0)), 0.0);
}

TEST(Solve, ZeroDrawdownIsCaseFive) {
  const auto& r = report(0.0, 0.0);
  EXPECT_EQ(r.case_label, CaseLabel::V);
  ASSERT_TRUE(r.switch_point.has_value());
}

TEST(Solve, EqualRatesCollapse) {
  const auto r = solve(reference_sf(), LinearDrawdown{-1.0, 1.0}, 0.6, 0.6);
  EXPECT_EQ(r.case_label, CaseLabel::II);
  EXPECT_FALSE(r.note.empty());
  EXPECT_TRUE(r.gamma_star.is_constant());
}

TEST(Solve, NonNegativeGIsCaseOne) {
  const ScaleFunction sf(BrownianDrift{0.0, 1.0}, 0.05);
  const auto r = solve(sf, LinearDrawdown{0.5, 1.0}, 0.2, 0.6);
  EXPECT_EQ(r.case_label, CaseLabel::I);
  EXPECT_EQ(r.gamma_star(1.0), 0.6);
}

TEST(Solve, BadControlRejected) {
  EXPECT_THROW(solve(reference_sf(), LinearDrawdown{0.1, 1.0}, 0.2, 1.0), ConfigError);
  EXPECT_THROW(solve(reference_sf(), LinearDrawdown{0.1, 1.0}, 0.7, 0.6), ConfigError);
  try {
    solve(reference_sf(), LinearDrawdown{0.1, 1.0}, 0.2, 1.0);
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma2 must be < 1"), std::string::npos);
  }
}

TEST(Solve, ViolatedPatternThrows) {
  std::vector<TabulatedDrawdown::Knot> knots;
  for (int i = 0; i <= 250; ++i) {
    const double x = 0.01 * i;
    knots.push_back({x, -0.5 + 0.5 * x + 0.0225 * std::sin(20 * x), 0.5 + 0.45 * std::cos(20 * x)});
  }
  SolveOptions opt;
  opt.scan.search_max = 2.0;
  EXPECT_THROW(solve(reference_sf(), TabulatedDrawdown(knots), 0.2, 0.6, opt), AssumptionViolated);
}

TEST(OptimalValue, LimitConstant) {
  const double phi = bisect_phi();
  EXPECT_LT(std::abs(0.6 / phi - 2.8209), 5e-4);
  for (double k : {0.1, -1.0}) EXPECT_NEAR(optimal_value(report(k, 1.0), 200.0), 0.6 / phi, 5e-3);
}

TEST(OptimalValue, ContinuousAndSmoothAtSwitch) {
  const auto& r = report(-1.0, 1.0);
  const double x1 = *r.switch_point;
  const double eps = 1e-9;
  EXPECT_NEAR(optimal_value(r, x1 - eps), optimal_value(r, x1), 1e-8);
  // One-sided difference quotients agree.
  const double h = 1e-5;
  const double left = (optimal_value(r, x1) - optimal_value(r, x1 - h)) / h;
  const double right = (optimal_value(r, x1 + h) - optimal_value(r, x1)) / h;
  EXPECT_NEAR(left, right, 1e-4);
}

TEST(OptimalValue, RateInequalityAroundSwitch) {
  const auto& r = report(-1.0, 1.0);
  const double x1 = *r.switch_point;
  for (double x = 0.02; x < 6.0; x += 0.05) {
    const double lhs = r.sf.log_derivative(xi_bar(r.f, x)) * optimal_value(r, x);
    if (x < x1 - 1e-6) { EXPECT_GE(lhs, 1.0 - 1e-9) << x; }
    if (x > x1 + 1e-6 && x < r.x0) { EXPECT_LE(lhs, 1.0 + 1e-9) << x; }
  }
}

TEST(OptimalValue, MatchesTaxReturnOfOptimalStrategy) {
  for (double k : {0.1, -1.0}) {
    const auto& r = report(k, 1.0);
    for (double x : {0.05, 0.3, 1.0, 2.0, 5.0, 12.0}) {
      const auto s = running_max_form(r.gamma_star, x);
      EXPECT_NEAR(tax_return(r.sf, s, r.f, x), optimal_value(r, x), 1e-7) << k << ' ' << x;
    }
  }
}

TEST(OptimalValue, MonotoneInSlope) {
  for (double x = 0.1; x < 20.0; x += 0.4)
    EXPECT_GE(optimal_value(report(-1.0, 1.0), x), optimal_value(report(0.1, 1.0), x) - 1e-9) << x;
}

TEST(OptimalValue, DominatesRandomStrategies) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double k : {0.1, -1.0}) {
    const auto& r = report(k, 1.0);
    for (int i = 0; i < 10; ++i) {
      const double b1 = 0.2 + 3.0 * u(rng);
      const double b2 = b1 + 3.0 * u(rng);
      const TaxStrategy s(0.2, 0.6, {b1, b2}, {0.2 + 0.4 * u(rng), 0.2 + 0.4 * u(rng), 0.2 + 0.4 * u(rng)});
      for (double x : {0.2, 1.0, 3.0}) EXPECT_LE(tax_return(r.sf, s, r.f, x), optimal_value(r, x) + 1e-7);
    }
  }
}

TEST(OptimalValue, ZeroDrawdownPowerForm) {
  const auto& r = report(0.0, 0.0);
  const auto& sf = r.sf;
  const double x1 = *r.switch_point;
  const double c1 = 1.0 / 0.8;
  const double c2 = 1.0 / 0.4;
  boost::math::quadrature::exp_sinh<double> tail;
  const double lw1 = sf.log_value(x1);
  const double tail_int = tail.integrate([&](double t) { return std::exp(c2 * (lw1 - sf.log_value(x1 + t))); });
  const double ratio = sf(x1) / sf(x1, 1);
  EXPECT_NEAR(ratio, 0.6 / 0.4 * tail_int, 1e-8 * ratio);
  for (int i = 1; i <= 20; ++i) {
    const double x = x1 * i / 21.0;
    const double lw = sf.log_value(x);
    const double head = gauss_kronrod<double, 61>::integrate(
        [&](double y) { return std::exp(c1 * (lw - sf.log_value(y))); }, x, x1, 15, 1e-13);
    const double closed = 0.2 * c1 * head + std::exp(c1 * (lw - lw1)) * ratio;
    EXPECT_NEAR(optimal_value(r, x), closed, 1e-8 * closed) << x;
  }
}

TEST(Hjb, Residuals) {
  for (double k : {0.1, -1.0}) {
    const auto& r = report(k, 1.0);
    std::vector<double> xs;
    for (int i = 1; i <= 200; ++i) xs.push_back(0.05 * i);
    const auto h = hjb_residual(r, xs);
    EXPECT_LT(h.finite_difference, 1e-5);
    EXPECT_LT(h.analytic, 1e-12);
    EXPECT_GT(h.points, 190);
  }
}

TEST(ValueCurve, InterpolatesNodes) {
  const auto& r = report(-1.0, 1.0);
  std::vector<double> xs;
  for (int i = 1; i <= 100; ++i) xs.push_back(0.1 * i);
  const ValueCurve curve(r, xs);
  for (double x : {0.1, 2.5, 10.0}) EXPECT_NEAR(curve(x), optimal_value(r, x), 1e-12);
  EXPECT_NEAR(curve(1.234), optimal_value(r, 1.234), 1e-4);
}
