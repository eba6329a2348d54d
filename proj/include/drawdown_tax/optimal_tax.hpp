#pragma once

// Optimal loss-carry-forward tax control. All functions of x here take x
// as the level of the taxed surplus at a running maximum; the optimal
// strategy is a feedback on that level. Use running_max_form to turn
// gamma_star into a function of the untaxed running maximum.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "drawdown_tax/drawdown.hpp"
#include "drawdown_tax/errors.hpp"
#include "drawdown_tax/levy_models.hpp"
#include "drawdown_tax/quadrature.hpp"
#include "drawdown_tax/taxed_exit.hpp"

namespace drawdown_tax {

enum class CaseLabel { I, II, III, IV, V, VI };

inline const char* to_string(CaseLabel c) {
  switch (c) {
    case CaseLabel::I: return "I";
    case CaseLabel::II: return "II";
    case CaseLabel::III: return "III";
    case CaseLabel::IV: return "IV";
    case CaseLabel::V: return "V";
    case CaseLabel::VI: return "VI";
  }
  return "?";
}

struct SolveOptions {
  IntegrationOptions integration{};
  SignScanOptions scan{};
  int probes = 256;
  double probe_start = 1e-6;        // times 1/Phi(q)
  double witness_threshold = 1e-10;  // |G| below this is treated as zero
  double switch_width = 1e-12;
};

namespace detail {

// integral_x^inf exp(-c integral_x^y (W'/W)(xi_bar(u)) du) w(y) dy with
// |w| <= bound, truncated where the envelope bound exp(-c Phi (y - x))
// drops below the tail epsilon.
template <class Weight>
double tail_integral(const LogRateIntegral& L, double phi_q, double c, const Weight& w, double bound, double x,
                     const IntegrationOptions& opt) {
  const double rate = c * phi_q;
  const double upper = tail_horizon(x, bound, rate, opt.tail_epsilon);
  const auto edges = panel_edges(x, upper, {}, 1.0 / rate);
  return discounted_integral([&](double a, double b) { return c * L(a, b); }, w, edges, opt.outer);
}

// Same integrand over the finite range [x, b].
template <class Weight>
double head_integral(const LogRateIntegral& L, double phi_q, double c, const Weight& w, double x, double b,
                     const IntegrationOptions& opt) {
  if (b <= x) return 0.0;
  const auto edges = panel_edges(x, b, {}, 1.0 / (c * phi_q));
  return discounted_integral([&](double a, double e) { return c * L(a, e); }, w, edges, opt.outer);
}

}  // namespace detail

/// integral_x^inf exp(-(1/(1-gamma)) integral_x^y (W'/W)(xi_bar(u)) du) g(y) dy.
/// G1 and G2 are this function at gamma1 and gamma2.
inline double G_gamma(const ScaleFunction& sf, const DrawdownFn& f, double gamma, double x,
                      const IntegrationOptions& opt = {}) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("G: gamma must lie in [0, 1)");
  detail::require_start(f, x, "G");
  const LogRateIntegral L(sf, f, opt.evaluation, opt.inner);
  const double c = 1.0 / (1.0 - gamma);
  return detail::tail_integral(L, sf.phi_q(), c, [&](double y) { return g_fn(sf, f, y); }, slope_bound(f), x,
                               opt);
}

inline double G1(const ScaleFunction& sf, const DrawdownFn& f, double gamma1, double x,
                 const IntegrationOptions& opt = {}) {
  return G_gamma(sf, f, gamma1, x, opt);
}

inline double G2(const ScaleFunction& sf, const DrawdownFn& f, double gamma2, double x,
                 const IntegrationOptions& opt = {}) {
  return G_gamma(sf, f, gamma2, x, opt);
}

/// Value of the constant strategy gamma started at level x:
/// (gamma/(1-gamma)) integral_x^inf exp(-(1/(1-gamma)) integral_x^y (W'/W)(xi_bar(u)) du) dy.
inline double constant_value(const ScaleFunction& sf, const DrawdownFn& f, double gamma, double x,
                             const IntegrationOptions& opt = {}) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("constant_value: gamma must lie in [0, 1)");
  detail::require_start(f, x, "constant_value");
  if (gamma == 0.0) return 0.0;
  const LogRateIntegral L(sf, f, opt.evaluation, opt.inner);
  const double c = 1.0 / (1.0 - gamma);
  return gamma * c * detail::tail_integral(L, sf.phi_q(), c, [](double) { return 1.0; }, 1.0, x, opt);
}

struct SolveReport {
  CaseLabel case_label = CaseLabel::I;
  SignPattern pattern{};
  double x0 = 0.0;
  std::optional<double> switch_point{};
  std::optional<double> witness{};
  TaxStrategy gamma_star = TaxStrategy::constant(0.0);
  double g_at_zero = 0.0;   // G2 (cases I, II, V) or G1 (III, IV, VI) at the first probe
  double tail_value = 0.0;  // value of the outer constant strategy at the switch point
  double probe_start = 0.0;
  std::string note{};

  ScaleFunction sf;
  DrawdownFn f;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  IntegrationOptions integration{};

  /// gamma used below the switch point and above it (equal when there is none).
  double inner_gamma() const { return gamma_star.values().front(); }
  double outer_gamma() const { return gamma_star.values().back(); }
};

/// Log-spaced probe grid on [start, end].
inline std::vector<double> probe_grid(double start, double end, int n) {
  std::vector<double> out;
  if (!(end > start) || n < 2) return {std::max(start, end)};
  const double ratio = std::log(end / start);
  for (int i = 0; i < n; ++i) out.push_back(start * std::exp(ratio * i / (n - 1)));
  out.back() = end;
  return out;
}

namespace detail {

struct Classification {
  CaseLabel label;
  std::optional<double> witness{};
  std::optional<double> bracket_lo;
  std::optional<double> bracket_hi;
  double first_probe_value;
};

inline Classification classify(const ScaleFunction& sf, const DrawdownFn& f, double gamma1, double gamma2,
                               const SignPattern& pattern, const SolveOptions& opt) {
  switch (pattern.kind) {
    case SignPatternKind::Violated:
      throw AssumptionViolated(std::string("g changes sign ") + std::to_string(pattern.sign_changes) +
                               " times on (0, " + std::to_string(pattern.search_max) + "]");
    case SignPatternKind::AllNonNeg: {
      const double start = opt.probe_start / sf.phi_q();
      return {CaseLabel::I, {}, {}, {}, G2(sf, f, gamma2, start, opt.integration)};
    }
    case SignPatternKind::AllNonPos: {
      const double start = opt.probe_start / sf.phi_q();
      return {CaseLabel::III, {}, {}, {}, G1(sf, f, gamma1, start, opt.integration)};
    }
    default: break;
  }
  const bool neg_to_pos = pattern.kind == SignPatternKind::NegToPos;
  const double gamma = neg_to_pos ? gamma2 : gamma1;
  const auto grid = probe_grid(opt.probe_start / sf.phi_q(), pattern.x0, opt.probes);
  Classification out{neg_to_pos ? CaseLabel::II : CaseLabel::IV, {}, {}, {}, 0.0};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    const double v = G_gamma(sf, f, gamma, x, opt.integration);
    if (i == 0) out.first_probe_value = v;
    const bool violates = neg_to_pos ? v < -opt.witness_threshold : v > opt.witness_threshold;
    if (violates) {
      if (!out.witness) out.witness = x;
      out.bracket_lo = x;
    } else if (out.witness && (neg_to_pos ? v >= 0.0 : v <= 0.0)) {
      out.bracket_hi = x;
      break;
    }
  }
  if (out.witness) out.label = neg_to_pos ? CaseLabel::V : CaseLabel::VI;
  return out;
}

}  // namespace detail

/// Case label for the given sign pattern.
inline CaseLabel classify_case(const ScaleFunction& sf, const DrawdownFn& f, double gamma1, double gamma2,
                               const SignPattern& pattern, const SolveOptions& opt = {}) {
  return detail::classify(sf, f, gamma1, gamma2, pattern, opt).label;
}

/// Smallest zero of G2 (case V) or G1 (case VI) to the right of the
/// witness, by bisection on [lo, hi] where lo is on the witness side.
inline double find_switch_point(const ScaleFunction& sf, const DrawdownFn& f, double gamma1, double gamma2,
                                CaseLabel label, double lo, double hi, const SolveOptions& opt = {}) {
  if (label != CaseLabel::V && label != CaseLabel::VI)
    throw DomainError("find_switch_point: only defined for cases V and VI");
  const bool five = label == CaseLabel::V;
  const double gamma = five ? gamma2 : gamma1;
  auto side = [&](double x) {
    const double v = G_gamma(sf, f, gamma, x, opt.integration);
    return five ? v < 0.0 : v > 0.0;  // true on the witness side
  };
  if (!side(lo) || side(hi))
    throw InternalInconsistency("find_switch_point: no sign change of G between the witness and x0");
  while (hi - lo > opt.switch_width * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (side(mid)) lo = mid; else hi = mid;
  }
  return hi;
}

/// Full solve: sign pattern, case, switch point and optimal strategy.
inline SolveReport solve(const ScaleFunction& sf, const DrawdownFn& f, double gamma1, double gamma2,
                         const SolveOptions& opt = {}) {
  if (auto v = control_violations(gamma1, gamma2); !v.empty()) throw ConfigError(v);
  if (auto v = drawdown_violations(f); !v.empty()) throw ConfigError(v);

  SolveReport r{.sf = sf, .f = f, .gamma1 = gamma1, .gamma2 = gamma2, .integration = opt.integration};
  r.probe_start = opt.probe_start / sf.phi_q();
  r.pattern = find_sign_change(sf, f, opt.scan);
  r.x0 = r.pattern.x0;
  auto cls = detail::classify(sf, f, gamma1, gamma2, r.pattern, opt);
  r.g_at_zero = cls.first_probe_value;
  r.witness = cls.witness;

  if (gamma1 == gamma2 && (cls.label == CaseLabel::V || cls.label == CaseLabel::VI)) {
    cls.label = cls.label == CaseLabel::V ? CaseLabel::II : CaseLabel::IV;
    r.note = "gamma1 == gamma2: the strategy set is a single point, so the switching case collapses";
  } else if (gamma1 == gamma2) {
    r.note = "gamma1 == gamma2: the strategy set is a single point";
  }
  if (r.pattern.kind == SignPatternKind::AllNonPos)
    r.note += std::string(r.note.empty() ? "" : "; ") + "no sign change of g up to " +
              std::to_string(r.pattern.search_max) + ", x0 reported as +inf";
  r.case_label = cls.label;

  switch (cls.label) {
    case CaseLabel::I:
    case CaseLabel::II:
      r.gamma_star = TaxStrategy::constant(gamma2, gamma1, gamma2);
      break;
    case CaseLabel::III:
    case CaseLabel::IV:
      r.gamma_star = TaxStrategy::constant(gamma1, gamma1, gamma2);
      break;
    case CaseLabel::V:
    case CaseLabel::VI: {
      const bool five = cls.label == CaseLabel::V;
      const double hi = cls.bracket_hi.value_or(r.x0);
      const double x_switch = find_switch_point(sf, f, gamma1, gamma2, cls.label, *cls.bracket_lo, hi, opt);
      r.switch_point = x_switch;
      const double inner = five ? gamma1 : gamma2;
      const double outer = five ? gamma2 : gamma1;
      r.gamma_star = TaxStrategy(gamma1, gamma2, {x_switch}, {inner, outer});
      r.tail_value = constant_value(sf, f, outer, x_switch, opt.integration);
      break;
    }
  }
  return r;
}

/// Optimal return function f(x), x > 0 (x = 0 allowed when xi_bar(0) > 0).
inline double optimal_value(const SolveReport& r, double x) {
  detail::require_start(r.f, x, "optimal_value");
  if (!r.switch_point || x >= *r.switch_point)
    return constant_value(r.sf, r.f, r.outer_gamma(), x, r.integration);
  const double x1 = *r.switch_point;
  const double gamma = r.inner_gamma();
  const double c = 1.0 / (1.0 - gamma);
  const LogRateIntegral L(r.sf, r.f, r.integration.evaluation, r.integration.inner);
  const double head =
      gamma == 0.0 ? 0.0
                   : gamma * c * detail::head_integral(L, r.sf.phi_q(), c, [](double) { return 1.0; }, x, x1,
                                                       r.integration);
  return head + std::exp(-c * L(x, x1)) * r.tail_value;
}

inline TaxStrategy optimal_strategy(const SolveReport& r) { return r.gamma_star; }

/// f'(x) from the case formula: (W'/W)(xi_bar(x)) f(x) / (1 - gamma) - gamma / (1 - gamma)
/// with gamma the active rate at x.
inline double optimal_derivative(const SolveReport& r, double x, std::optional<double> value = {}) {
  const double fx = value ? *value : optimal_value(r, x);
  const double gamma = r.gamma_star(x);
  const LogRateIntegral L(r.sf, r.f, r.integration.evaluation, r.integration.inner);
  return (L.rate(x) * fx - gamma) / (1.0 - gamma);
}

struct HjbResidual {
  double analytic = 0.0;
  double finite_difference = 0.0;
  double worst_x_analytic = 0.0;
  double worst_x_fd = 0.0;
  int points = 0;
};

/// sup over gamma in {gamma1, gamma2} of
///   gamma/(1-gamma) - (W'/W)(xi_bar(x)) f(x)/(1-gamma) + f'(x),
/// with f' taken from the case formula and from central differences.
/// Grid points within `exclusion` of the switch point are skipped.
inline HjbResidual hjb_residual(const SolveReport& r, const std::vector<double>& xs, double h = 1e-5,
                                double exclusion = 1e-6) {
  HjbResidual out;
  const LogRateIntegral L(r.sf, r.f, r.integration.evaluation, r.integration.inner);
  auto sup_expr = [&](double rate_f, double fp) {
    double best = -std::numeric_limits<double>::infinity();
    for (double gamma : {r.gamma1, r.gamma2})
      best = std::max(best, (gamma - rate_f) / (1.0 - gamma) + fp);
    return std::abs(best);
  };
  for (double x : xs) {
    if (r.switch_point && std::abs(x - *r.switch_point) < exclusion) continue;
    if (!(x - h > 0.0)) continue;
    const double fx = optimal_value(r, x);
    const double rate_f = L.rate(x) * fx;
    const double fp_analytic = optimal_derivative(r, x, fx);
    const double fp_fd = (optimal_value(r, x + h) - optimal_value(r, x - h)) / (2.0 * h);
    const double ra = sup_expr(rate_f, fp_analytic);
    const double rf = sup_expr(rate_f, fp_fd);
    if (ra > out.analytic) {
      out.analytic = ra;
      out.worst_x_analytic = x;
    }
    if (rf > out.finite_difference) {
      out.finite_difference = rf;
      out.worst_x_fd = x;
    }
    ++out.points;
  }
  return out;
}

/// Value function tabulated on a grid with monotone cubic (Fritsch-Carlson)
/// interpolation, for plotting only.
class ValueCurve {
 public:
  ValueCurve(const SolveReport& r, std::vector<double> xs) : xs_(std::move(xs)) {
    if (xs_.size() < 2) throw DomainError("ValueCurve: need at least two grid points");
    for (std::size_t i = 1; i < xs_.size(); ++i)
      if (!(xs_[i] > xs_[i - 1])) throw DomainError("ValueCurve: grid must be strictly increasing");
    ys_.reserve(xs_.size());
    for (double x : xs_) ys_.push_back(optimal_value(r, x));
    slopes_ = pchip_slopes(xs_, ys_);
  }

  double operator()(double x) const {
    if (x < xs_.front() || x > xs_.back()) throw DomainError("ValueCurve: x outside the tabulated range");
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    std::size_t i = it == xs_.begin() ? 0 : static_cast<std::size_t>(it - xs_.begin()) - 1;
    if (i + 1 >= xs_.size()) i = xs_.size() - 2;
    const double h = xs_[i + 1] - xs_[i];
    const double t = (x - xs_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * ys_[i] + (t3 - 2 * t2 + t) * h * slopes_[i] + (-2 * t3 + 3 * t2) * ys_[i + 1] +
           (t3 - t2) * h * slopes_[i + 1];
  }
  const std::vector<double>& xs() const noexcept { return xs_; }
  const std::vector<double>& values() const noexcept { return ys_; }

 private:
  static std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> h(n - 1), delta(n - 1), m(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = x[i + 1] - x[i];
      delta[i] = (y[i + 1] - y[i]) / h[i];
    }
    if (n == 2) return {delta[0], delta[0]};
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) continue;
      const double w1 = 2 * h[i] + h[i - 1];
      const double w2 = h[i] + 2 * h[i - 1];
      m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
      double s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (s * d0 <= 0.0) return 0.0;
      if (d0 * d1 <= 0.0 && std::abs(s) > 3 * std::abs(d0)) return 3 * d0;
      return s;
    };
    m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3 < n ? n - 3 : 0], delta[n - 2], delta[n - 3 < n ? n - 3 : 0]);
    return m;
  }

  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> slopes_;
};

}  // namespace drawdown_tax
