#include <chrono>
#include <cmath>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "drawdown_tax/drawdown.hpp"

using namespace drawdown_tax;

namespace {

const ScaleFunction& reference_sf() {
  static const ScaleFunction sf(BrownianDrift{0.03, 0.4}, 0.01);
  return sf;
}

}  // namespace

TEST(Drawdown, LinearArithmetic) {
  const DrawdownFn f = LinearDrawdown{0.1, 1.0};
  EXPECT_NEAR(xi(f, 2.0), -0.8, 1e-15);
  EXPECT_EQ(xi_prime(f, 2.0), 0.1);
  EXPECT_NEAR(xi_bar(f, 2.0), 2.8, 1e-15);
  const DrawdownFn zero = LinearDrawdown{0.0, 0.0};
  EXPECT_EQ(xi(zero, 5.0), 0.0);
  EXPECT_EQ(xi_bar(zero, 5.0), 5.0);
  const DrawdownFn steep = LinearDrawdown{-1.0, 1.0};
  EXPECT_EQ(xi(steep, 1.0), -2.0);
  EXPECT_EQ(xi_bar(steep, 1.0), 3.0);
  EXPECT_EQ(xi_bar(f, 0.0), 1.0);
}

TEST(Drawdown, LinearViolations) {
  EXPECT_FALSE(drawdown_violations(LinearDrawdown{1.0, 0.0}).empty());
  EXPECT_FALSE(drawdown_violations(LinearDrawdown{0.5, -1.0}).empty());
  EXPECT_TRUE(drawdown_violations(LinearDrawdown{0.99, 0.0}).empty());
}

TEST(Drawdown, TabulatedHermite) {
  // Knots sampled from xi(x) = 0.3 x - 0.5 + 0.1 sin(x).
  std::vector<TabulatedDrawdown::Knot> knots;
  for (int i = 0; i <= 40; ++i) {
    const double x = 0.25 * i;
    knots.push_back({x, 0.3 * x - 0.5 + 0.1 * std::sin(x), 0.3 + 0.1 * std::cos(x)});
  }
  const TabulatedDrawdown t(knots);
  for (const auto& k : knots) {
    EXPECT_NEAR(t.value(k.x), k.xi, 1e-14);
    EXPECT_NEAR(t.derivative(k.x), k.xi_prime, 1e-12);
  }
  for (double x = 0.01; x < 10.0; x += 0.173) {
    EXPECT_NEAR(t.value(x), 0.3 * x - 0.5 + 0.1 * std::sin(x), 1e-5);
    const double h = 1e-6;
    EXPECT_NEAR(t.derivative(x), (t.value(x + h) - t.value(x - h)) / (2 * h), 1e-7);
  }
  EXPECT_THROW(t.value(10.5), DomainError);
}

TEST(Drawdown, TabulatedRejectsInvalid) {
  EXPECT_THROW(TabulatedDrawdown({{0.0, 0.0, 0.0}, {1.0, -1.0, 0.0}}), DomainError);  // xi(0) = 0
  EXPECT_THROW(TabulatedDrawdown({{0.0, -1.0, 0.0}, {0.0, -1.0, 0.0}}), DomainError);
  EXPECT_THROW(TabulatedDrawdown({{0.0, -1.0, 0.0}}), DomainError);
}

TEST(Drawdown, TabulatedCsv) {
  const std::string path = ::testing::TempDir() + "xi_table.csv";
  {
    std::ofstream out(path);
    out << "# sample\nx,xi,xi_prime\n0,-1,0.1\n1,-0.9,0.1\n2,-0.8,0.1\n";
  }
  const auto t = TabulatedDrawdown::from_csv(path);
  EXPECT_EQ(t.knots().size(), 3u);
  EXPECT_NEAR(t.value(1.5), -0.85, 1e-14);
}

TEST(GFunction, ZeroDrawdownReducesToCurvatureRatio) {
  const auto& sf = reference_sf();
  const DrawdownFn f = LinearDrawdown{0.0, 0.0};
  for (double x : {0.1, 1.0, 3.0, 25.0})
    EXPECT_NEAR(g_fn(sf, f, x), sf(x, 2) * sf(x) / (sf(x, 1) * sf(x, 1)), 1e-12);
  // Constant offset shifts the argument.
  const DrawdownFn shifted = LinearDrawdown{0.0, 2.0};
  EXPECT_NEAR(g_fn(sf, shifted, 1.0), sf.curvature_ratio(3.0), 1e-12);
}

TEST(GFunction, LimitIsOne) {
  const auto& sf = reference_sf();
  for (double k : {0.1, -1.0})
    for (double x = 100.0; x < 1000.0; x += 50.0) EXPECT_NEAR(g_fn(sf, LinearDrawdown{k, 1.0}, x), 1.0, 1e-3);
}

TEST(GFunction, SingularInputRejected) {
  EXPECT_THROW(g_fn(reference_sf(), LinearDrawdown{0.0, 0.0}, 0.0), SingularInput);
}

TEST(SignChange, ReferenceParameters) {
  const auto& sf = reference_sf();
  for (auto [k, expected] : {std::pair{0.1, 1.360}, std::pair{-1.0, 1.443}}) {
    const auto start = std::chrono::steady_clock::now();
    const auto p = find_sign_change(sf, LinearDrawdown{k, 1.0});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_EQ(p.kind, SignPatternKind::NegToPos);
    EXPECT_NEAR(p.x0, expected, 1e-3);
    EXPECT_LT(secs, 1.0);
    EXPECT_NEAR(g_fn(sf, LinearDrawdown{k, 1.0}, p.x0), 0.0, 1e-9);
  }
}

TEST(SignChange, Deterministic) {
  const auto a = find_sign_change(reference_sf(), LinearDrawdown{-1.0, 1.0});
  const auto b = find_sign_change(reference_sf(), LinearDrawdown{-1.0, 1.0});
  EXPECT_EQ(a.x0, b.x0);
}

TEST(SignChange, PatternHoldsOnGrid) {
  const auto& sf = reference_sf();
  const DrawdownFn f = LinearDrawdown{0.1, 1.0};
  const auto p = find_sign_change(sf, f);
  for (double x = 0.01; x < 30.0; x += 0.01) {
    if (x < p.x0 - 1e-9) { EXPECT_LE(g_fn(sf, f, x), 1e-12) << x; }
    if (x > p.x0 + 1e-9) { EXPECT_GE(g_fn(sf, f, x), -1e-12) << x; }
  }
}

TEST(SignChange, ZeroDriftGivesNonNegative) {
  // mu = 0 makes W proportional to sinh, so W'' W / W'^2 = tanh^2 >= 0.
  const ScaleFunction sf(BrownianDrift{0.0, 1.0}, 0.05);
  for (double k : {0.0, 0.5})
    for (double d : {0.0, 1.0}) {
      const auto p = find_sign_change(sf, LinearDrawdown{k, d});
      EXPECT_EQ(p.kind, SignPatternKind::AllNonNeg);
      EXPECT_EQ(p.x0, 0.0);
    }
}

TEST(SignChange, ViolatedPattern) {
  // Near the origin W''W/W'^2 lies in (-0.28, 0), so g follows the sign of
  // an oscillating xi' that swings between 0.05 and 0.95.
  const auto& sf = reference_sf();
  std::vector<TabulatedDrawdown::Knot> knots;
  for (int i = 0; i <= 250; ++i) {
    const double x = 0.01 * i;
    knots.push_back({x, -0.5 + 0.5 * x + 0.0225 * std::sin(20 * x), 0.5 + 0.45 * std::cos(20 * x)});
  }
  const auto p = find_sign_change(sf, TabulatedDrawdown(knots), {.search_max = 2.0});
  EXPECT_EQ(p.kind, SignPatternKind::Violated);
  EXPECT_GE(p.sign_changes, 2);
  EXPECT_TRUE(std::isnan(p.x0));
}
