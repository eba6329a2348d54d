#pragma once

// Analytics for an arbitrary piecewise-constant loss-carry-forward tax
// strategy: the net-of-tax running-maximum map, the two-sided exit
// transform and expected discounted tax up to a barrier or up to the
// general draw-down time.
//
// Coordinates: a TaxStrategy is a function of the *untaxed* running
// maximum X-bar. The taxed running maximum is U-bar = gamma_bar_x(X-bar).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "drawdown_tax/drawdown.hpp"
#include "drawdown_tax/errors.hpp"
#include "drawdown_tax/levy_models.hpp"
#include "drawdown_tax/quadrature.hpp"

namespace drawdown_tax {

class TaxStrategy {
 public:
  /// gamma = values[i] on [breakpoints[i-1], breakpoints[i]) with the
  /// first piece starting at 0 and the last extending to infinity.
  TaxStrategy(double gamma1, double gamma2, std::vector<double> breakpoints, std::vector<double> values)
      : gamma1_(gamma1), gamma2_(gamma2), breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (!(gamma1_ >= 0.0 && gamma1_ <= gamma2_))
      throw DomainError("TaxStrategy: need 0 <= gamma1 <= gamma2");
    if (!(gamma2_ < 1.0)) throw DomainError("TaxStrategy: need gamma2 < 1");
    if (values_.size() != breakpoints_.size() + 1)
      throw DomainError("TaxStrategy: need exactly one more value than breakpoints");
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
      if (!(breakpoints_[i] >= 0.0) || !std::isfinite(breakpoints_[i]))
        throw DomainError("TaxStrategy: breakpoints must be finite and >= 0");
      if (i > 0 && !(breakpoints_[i] > breakpoints_[i - 1]))
        throw DomainError("TaxStrategy: breakpoints must be strictly increasing");
    }
    for (double v : values_)
      if (!(v >= gamma1_ && v <= gamma2_)) throw DomainError("TaxStrategy: value outside [gamma1, gamma2]");
  }

  static TaxStrategy constant(double gamma, double gamma1, double gamma2) {
    return TaxStrategy(gamma1, gamma2, {}, {gamma});
  }
  static TaxStrategy constant(double gamma) { return constant(gamma, gamma, gamma); }

  double operator()(double x) const {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
    return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
  }

  double gamma1() const noexcept { return gamma1_; }
  double gamma2() const noexcept { return gamma2_; }
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<double>& values() const noexcept { return values_; }
  bool is_constant() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [&](double v) { return v == values_.front(); });
  }
  bool is_zero() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
  }

 private:
  double gamma1_;
  double gamma2_;
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

inline std::vector<std::string> control_violations(double gamma1, double gamma2) {
  std::vector<std::string> out;
  if (!(gamma1 >= 0.0)) out.emplace_back("control.gamma1 must be >= 0");
  if (!(gamma1 <= gamma2)) out.emplace_back("control.gamma1 must be <= control.gamma2");
  if (!(gamma2 < 1.0))
    out.emplace_back(
        "control.gamma2 must be < 1: the exit and tax identities require 0 <= gamma1 <= gamma2 < 1");
  return out;
}

/// x + integral_x^z (1 - gamma(y)) dy, computed piece by piece.
inline double gamma_bar(const TaxStrategy& s, double x, double z) {
  if (!(z >= x)) throw DomainError("gamma_bar: need z >= x");
  double out = x;
  double left = x;
  const auto& bp = s.breakpoints();
  for (std::size_t i = 0; i <= bp.size() && left < z; ++i) {
    const double right = i < bp.size() ? std::min(bp[i], z) : z;
    if (right > left) {
      out += (1.0 - s.values()[i]) * (right - left);
      left = right;
    }
  }
  return out;
}

/// The unique z >= x with gamma_bar(s, x, z) = v.
inline double gamma_bar_inv(const TaxStrategy& s, double x, double v) {
  if (!(v >= x)) throw DomainError("gamma_bar_inv: need v >= x");
  double level = x;
  double left = x;
  const auto& bp = s.breakpoints();
  for (std::size_t i = 0; i <= bp.size(); ++i) {
    if (i < bp.size() && bp[i] <= left) continue;
    const double slope = 1.0 - s.values()[i];
    const double right = i < bp.size() ? bp[i] : std::numeric_limits<double>::infinity();
    const double reach = level + slope * (right - left);
    if (v <= reach) return left + (v - level) / slope;
    level = reach;
    left = right;
  }
  return left;
}

/// Re-expresses a strategy stated in taxed-surplus coordinates (as the
/// optimal strategy is) as a function of the untaxed running maximum, for
/// a process started at x.
inline TaxStrategy running_max_form(const TaxStrategy& level_form, double x) {
  std::vector<double> breaks;
  std::vector<double> values{level_form(x)};
  double u = x;
  double z = x;
  for (std::size_t i = 0; i < level_form.breakpoints().size(); ++i) {
    const double next_u = level_form.breakpoints()[i];
    if (next_u <= x) continue;
    z += (next_u - u) / (1.0 - values.back());
    u = next_u;
    breaks.push_back(z);
    values.push_back(level_form.values()[i + 1]);
  }
  return TaxStrategy(level_form.gamma1(), level_form.gamma2(), std::move(breaks), std::move(values));
}

enum class Evaluation {
  Auto,        // log-scale shortcut for linear xi, quadrature otherwise
  Quadrature,  // always integrate W'/W numerically
};

struct IntegrationOptions {
  Evaluation evaluation = Evaluation::Auto;
  QuadTolerance outer{};
  QuadTolerance inner{1e-13, 1e-12, 4000};
  double tail_epsilon = 1e-14;
};

/// Integral of u -> (W'/W)(xi_bar(u)). For xi(u) = k u - d it equals
/// (log W(xi_bar(b)) - log W(xi_bar(a))) / (1 - k).
class LogRateIntegral {
 public:
  LogRateIntegral(const ScaleFunction& sf, const DrawdownFn& f, Evaluation ev = Evaluation::Auto,
                  QuadTolerance tol = {1e-13, 1e-12, 4000})
      : sf_(&sf), f_(&f), tol_(tol) {
    if (ev == Evaluation::Auto) {
      if (const auto* lin = std::get_if<LinearDrawdown>(&f)) {
        closed_form_ = true;
        slope_ = 1.0 - lin->k;
      }
    }
  }

  bool closed_form() const noexcept { return closed_form_; }

  double rate(double u) const {
    const double z = xi_bar(*f_, u);
    if (!(z > 0.0)) throw SingularInput("x - xi(x) reached 0 at x=" + std::to_string(u));
    return sf_->log_derivative(z);
  }

  double operator()(double a, double b) const {
    if (a == b) return 0.0;
    if (closed_form_) {
      const double za = xi_bar(*f_, a);
      const double zb = xi_bar(*f_, b);
      if (!(za > 0.0) || !(zb > 0.0))
        throw SingularInput("x - xi(x) reached 0 inside the integration range");
      return (sf_->log_value(zb) - sf_->log_value(za)) / slope_;
    }
    return integrate([this](double u) { return rate(u); }, a, b, tol_);
  }

 private:
  const ScaleFunction* sf_;
  const DrawdownFn* f_;
  QuadTolerance tol_;
  bool closed_form_ = false;
  double slope_ = 1.0;
};

/// Panel edges on [from, to]: the kinks inside the range plus a uniform
/// subdivision of width `width`.
inline std::vector<double> panel_edges(double from, double to, const std::vector<double>& kinks, double width) {
  std::vector<double> edges{from};
  const int n = std::max(1, static_cast<int>(std::ceil((to - from) / width)));
  for (int i = 1; i < n; ++i) edges.push_back(from + (to - from) * i / n);
  for (double k : kinks)
    if (k > from && k < to) edges.push_back(k);
  edges.push_back(to);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

/// integral over [edges.front(), edges.back()] of
///   exp(-(integral_{edges.front()}^y rate)) * weight(y) dy.
/// inner(a, b) must return the rate integral over a sub-range of one
/// panel. The inner integral is accumulated panel by panel, so each outer
/// node only integrates from the start of its own panel.
template <class Inner, class Weight>
double discounted_integral(const Inner& inner, const Weight& weight, const std::vector<double>& edges,
                           const QuadTolerance& tol) {
  double total = 0.0;
  double cumulative = 0.0;
  for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
    const double start = edges[j];
    const double base = cumulative;
    total += integrate([&](double y) { return std::exp(-(base + inner(start, y))) * weight(y); }, start,
                       edges[j + 1], tol);
    cumulative += inner(start, edges[j + 1]);
  }
  return total;
}

namespace detail {

inline void require_start(const DrawdownFn& f, double x, const char* what) {
  if (!(x >= 0.0)) throw DomainError(std::string(what) + ": x must be >= 0");
  if (!(xi_bar(f, x) > 0.0))
    throw SingularInput(std::string(what) + ": x - xi(x) must be > 0 at the starting point");
}

// Rate integral in running-maximum coordinates for s in [a, b] inside one
// strategy piece: integral_a^b (W'/W)(xi_bar(gamma_bar_x(s))) ds.
class RunningMaxRate {
 public:
  RunningMaxRate(const LogRateIntegral& L, const TaxStrategy& s, double x, const QuadTolerance& tol)
      : L_(&L), s_(&s), x_(x), tol_(tol) {}

  double operator()(double a, double b) const {
    if (a == b) return 0.0;
    if (L_->closed_form()) {
      const double gamma = (*s_)(a);
      return (*L_)(gamma_bar(*s_, x_, a), gamma_bar(*s_, x_, b)) / (1.0 - gamma);
    }
    return integrate([this](double t) { return L_->rate(gamma_bar(*s_, x_, t)); }, a, b, tol_);
  }

 private:
  const LogRateIntegral* L_;
  const TaxStrategy* s_;
  double x_;
  QuadTolerance tol_;
};

}  // namespace detail

/// E_x[exp(-q tau_a^+); tau_a^+ < tau_xi^gamma]
///   = exp(-integral_x^a (W'/W)(y - xi(y)) / (1 - gamma(gamma_bar_x^{-1}(y))) dy).
inline double exit_laplace(const ScaleFunction& sf, const TaxStrategy& s, const DrawdownFn& f, double x,
                           double a, const IntegrationOptions& opt = {}) {
  detail::require_start(f, x, "exit_laplace");
  if (!(a >= x)) throw DomainError("exit_laplace: need a >= x");
  if (a == x) return 1.0;
  const LogRateIntegral L(sf, f, opt.evaluation, opt.inner);
  // Pieces in taxed coordinates are the images of the strategy breakpoints.
  double exponent = 0.0;
  double u = x;
  for (std::size_t i = 0; i <= s.breakpoints().size() && u < a; ++i) {
    if (i < s.breakpoints().size() && s.breakpoints()[i] <= x) continue;
    const double next =
        i < s.breakpoints().size() ? std::min(a, gamma_bar(s, x, s.breakpoints()[i])) : a;
    exponent += L(u, next) / (1.0 - s.values()[i]);
    u = next;
  }
  return std::exp(-exponent);
}

/// Expected discounted tax paid before min(tau_a^+, tau_xi^gamma):
///   integral_x^{gamma_bar_x^{-1}(a)} exp(-integral_x^y (W'/W)(xi_bar(gamma_bar_x(s))) ds) gamma(y) dy.
inline double tax_return_to_barrier(const ScaleFunction& sf, const TaxStrategy& s, const DrawdownFn& f,
                                    double x, double a, const IntegrationOptions& opt = {}) {
  detail::require_start(f, x, "tax_return_to_barrier");
  if (!(a >= x)) throw DomainError("tax_return_to_barrier: need a >= x");
  if (a == x || s.is_zero()) return 0.0;
  const LogRateIntegral L(sf, f, opt.evaluation, opt.inner);
  const detail::RunningMaxRate inner(L, s, x, opt.inner);
  const double upper = gamma_bar_inv(s, x, a);
  const auto edges = panel_edges(x, upper, s.breakpoints(), 1.0 / sf.phi_q());
  return discounted_integral(inner, [&](double y) { return s(y); }, edges, opt.outer);
}

/// Truncation point for tails whose integrand is bounded by
/// bound * exp(-rate (y - x)).
inline double tail_horizon(double x, double bound, double rate, double epsilon) {
  return x + std::max(0.0, std::log(std::max(bound, epsilon) / epsilon)) / rate;
}

/// Expected discounted tax paid until the general draw-down time.
inline double tax_return(const ScaleFunction& sf, const TaxStrategy& s, const DrawdownFn& f, double x,
                         const IntegrationOptions& opt = {}) {
  detail::require_start(f, x, "tax_return");
  if (s.is_zero()) return 0.0;
  const LogRateIntegral L(sf, f, opt.evaluation, opt.inner);
  const detail::RunningMaxRate inner(L, s, x, opt.inner);
  // W'/W >= Phi(q) bounds the integrand by gamma2 exp(-Phi(q) (y - x)).
  const double upper = tail_horizon(x, s.gamma2(), sf.phi_q(), opt.tail_epsilon);
  const auto edges = panel_edges(x, upper, s.breakpoints(), 1.0 / sf.phi_q());
  return discounted_integral(inner, [&](double y) { return s(y); }, edges, opt.outer);
}

/// gamma2 / Phi(q), an upper bound for every tax return function.
inline double tax_upper_bound(const ScaleFunction& sf, double gamma2) { return gamma2 / sf.phi_q(); }

}  // namespace drawdown_tax
