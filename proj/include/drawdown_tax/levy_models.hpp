#pragma once

// Laplace exponents, right inverses and q-scale functions for the two
// spectrally negative Levy families supported here. Both families have a
// scale function that is a sum of two exponentials,
//
//   W(x) = c1 exp(r1 x) + c2 exp(r2 x),   r1 = Phi(q) > r2,
//
// and every quantity below is evaluated in the factored form
// c1 exp(r1 x) (1 + rho exp(-(r1 - r2) x)), rho = c2 / c1, so that ratios
// such as W'/W never overflow.

#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "drawdown_tax/errors.hpp"

namespace drawdown_tax {

/// X(t) = mu t + sigma B(t).
struct BrownianDrift {
  double mu = 0.0;
  double sigma = 1.0;
};

/// X(t) = x + p t - (sum of N(t) claims), claims ~ Exp(claim_rate),
/// N a Poisson process with rate `intensity`.
struct CramerLundberg {
  double premium = 1.0;
  double intensity = 1.0;
  double claim_rate = 1.0;
};

using LevyModel = std::variant<BrownianDrift, CramerLundberg>;

/// Every violated model invariant, empty when the model is admissible.
inline std::vector<std::string> model_violations(const LevyModel& model) {
  std::vector<std::string> out;
  if (const auto* bm = std::get_if<BrownianDrift>(&model)) {
    if (!(bm->sigma > 0.0) || !std::isfinite(bm->sigma))
      out.emplace_back("model.sigma must be > 0");
    if (!(bm->mu >= 0.0) || !std::isfinite(bm->mu))
      out.emplace_back("model.mu must be >= 0 (psi'(0+) >= 0)");
  } else {
    const auto& cl = std::get<CramerLundberg>(model);
    if (!(cl.premium > 0.0)) out.emplace_back("model.premium must be > 0");
    if (!(cl.intensity > 0.0)) out.emplace_back("model.intensity must be > 0");
    if (!(cl.claim_rate > 0.0)) out.emplace_back("model.claim_rate must be > 0");
    if (out.empty() && cl.premium < cl.intensity / cl.claim_rate)
      out.emplace_back("model.premium must be >= intensity / claim_rate (psi'(0+) >= 0)");
  }
  return out;
}

inline void validate(const LevyModel& model) {
  auto v = model_violations(model);
  if (!v.empty()) throw DomainError(v.front());
}

/// psi(theta) = log E[exp(theta (X(1) - x))], theta >= 0.
inline double laplace_exponent(const LevyModel& model, double theta) {
  if (!(theta >= 0.0)) throw DomainError("laplace_exponent: theta must be >= 0");
  if (const auto* bm = std::get_if<BrownianDrift>(&model))
    return bm->mu * theta + 0.5 * bm->sigma * bm->sigma * theta * theta;
  const auto& cl = std::get<CramerLundberg>(model);
  return cl.premium * theta - cl.intensity * theta / (cl.claim_rate + theta);
}

inline double laplace_exponent_derivative(const LevyModel& model, double theta) {
  if (const auto* bm = std::get_if<BrownianDrift>(&model))
    return bm->mu + bm->sigma * bm->sigma * theta;
  const auto& cl = std::get<CramerLundberg>(model);
  const double s = cl.claim_rate + theta;
  return cl.premium - cl.intensity * cl.claim_rate / (s * s);
}

namespace detail {

struct ExponentPair {
  double upper;  // Phi(q)
  double lower;  // the other root of psi(theta) = q
};

// Both roots of psi(theta) = q, computed without cancellation.
inline ExponentPair exponent_pair(const LevyModel& model, double q) {
  if (const auto* bm = std::get_if<BrownianDrift>(&model)) {
    const double s2 = bm->sigma * bm->sigma;
    const double root = std::sqrt(bm->mu * bm->mu + 2.0 * q * s2);
    // (-mu + root) / s2 rewritten to avoid cancellation for small q.
    const double upper = (bm->mu + root) > 0.0 ? 2.0 * q / (bm->mu + root) : 0.0;
    const double lower = -2.0 * bm->mu / s2 - upper;
    return {upper, lower};
  }
  const auto& cl = std::get<CramerLundberg>(model);
  // p t^2 + (p m - lambda - q) t - q m = 0
  const double p = cl.premium;
  const double b = q + cl.intensity - p * cl.claim_rate;
  const double disc = std::sqrt(b * b + 4.0 * p * q * cl.claim_rate);
  const double product = -q * cl.claim_rate / p;
  double upper;
  double lower;
  if (b >= 0.0) {
    upper = (b + disc) / (2.0 * p);
    lower = upper > 0.0 ? product / upper : (b - disc) / (2.0 * p);
  } else {
    lower = (b - disc) / (2.0 * p);
    upper = product / lower;
  }
  return {upper, lower};
}

}  // namespace detail

/// Right inverse of psi: the largest root of psi(theta) = q, q >= 0.
/// The closed form is checked by plugging it back into psi.
inline double phi(const LevyModel& model, double q) {
  if (!(q >= 0.0)) throw DomainError("phi: q must be >= 0");
  validate(model);
  const double root = detail::exponent_pair(model, q).upper;
  const double residual = std::abs(laplace_exponent(model, root) - q);
  if (residual > 1e-10 * std::max(1.0, q))
    throw InternalInconsistency("phi: plug-back residual " + std::to_string(residual));
  return root;
}

/// Largest root of psi(theta) = q by safeguarded Newton iteration; an
/// independent route used to cross-check `phi`.
inline double phi_newton(const LevyModel& model, double q) {
  if (!(q >= 0.0)) throw DomainError("phi_newton: q must be >= 0");
  validate(model);
  if (q == 0.0) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (laplace_exponent(model, hi) < q) {
    lo = hi;
    hi *= 2.0;
  }
  // psi is convex and increasing past lo, so Newton from the right is
  // monotone; bisection takes over whenever a step leaves the bracket.
  double theta = hi;
  for (int it = 0; it < 200; ++it) {
    const double f = laplace_exponent(model, theta) - q;
    if (f > 0.0) hi = theta; else lo = theta;
    const double slope = laplace_exponent_derivative(model, theta);
    double next = slope > 0.0 ? theta - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - theta) <= 1e-15 * std::max(1.0, theta)) return next;
    theta = next;
  }
  return theta;
}

/// q-scale function W^(q) with analytic first and second derivatives.
class ScaleFunction {
 public:
  ScaleFunction(LevyModel model, double q) : model_(model), q_(q) {
    validate(model_);
    if (!(q > 0.0)) throw DomainError("ScaleFunction: q must be > 0");
    phi_ = phi(model_, q_);
    const auto roots = detail::exponent_pair(model_, q_);
    upper_ = roots.upper;
    lower_ = roots.lower;
    gap_ = upper_ - lower_;
    if (const auto* bm = std::get_if<BrownianDrift>(&model_)) {
      const double s2 = bm->sigma * bm->sigma;
      // 2 / (sigma^2 Xi) * exp(-mu x / sigma^2) sinh(Xi x), Xi = gap / 2.
      lead_ = 2.0 / (s2 * gap_);
      ratio_ = -1.0;
      vanishes_at_zero_ = true;
    } else {
      const auto& cl = std::get<CramerLundberg>(model_);
      const double a_plus = (cl.claim_rate + upper_) / gap_;
      const double a_minus = (cl.claim_rate + lower_) / gap_;
      lead_ = a_plus / cl.premium;
      ratio_ = -a_minus / a_plus;
      coeff_plus_ = a_plus;
      coeff_minus_ = a_minus;
      vanishes_at_zero_ = false;
    }
  }

  const LevyModel& model() const noexcept { return model_; }
  double q() const noexcept { return q_; }
  double phi_q() const noexcept { return phi_; }
  double upper_exponent() const noexcept { return upper_; }
  double lower_exponent() const noexcept { return lower_; }
  /// A+ and A- of the Cramer-Lundberg representation (zero for Brownian).
  double coefficient_plus() const noexcept { return coeff_plus_; }
  double coefficient_minus() const noexcept { return coeff_minus_; }
  bool vanishes_at_zero() const noexcept { return vanishes_at_zero_; }

  /// W^(q)(x) for order 0, W^(q)'(x) for 1, W^(q)''(x) for 2.
  double operator()(double x, int order = 0) const {
    check_argument(x, order);
    const double growth = std::exp(upper_ * x);
    return lead_ * growth * factor(x, order);
  }

  double derivative(double x, int order) const { return (*this)(x, order); }

  /// log W^(q)(x) for x > 0, stable for arbitrarily large x.
  double log_value(double x) const {
    if (!(x > 0.0) && vanishes_at_zero_) throw DomainError("log W: x must be > 0");
    if (!(x >= 0.0)) throw DomainError("log W: x must be >= 0");
    return std::log(lead_) + upper_ * x + std::log(factor(x, 0));
  }

  /// W^(q)'(x) / W^(q)(x) for x > 0; bounded below by Phi(q).
  double log_derivative(double x) const {
    if (!(x > 0.0)) throw DomainError("W'/W: x must be > 0");
    return factor(x, 1) / factor(x, 0);
  }

  /// W''(x) W(x) / W'(x)^2 for x >= 0.
  double curvature_ratio(double x) const {
    if (!(x >= 0.0)) throw DomainError("W''W/W'^2: x must be >= 0");
    const double d1 = factor(x, 1);
    return factor(x, 2) * factor(x, 0) / (d1 * d1);
  }

 private:
  void check_argument(double x, int order) const {
    if (!(x >= 0.0)) throw DomainError("scale function: x must be >= 0");
    if (order < 0 || order > 2) throw DomainError("scale function: order must be 0, 1 or 2");
  }

  // r1^n + rho r2^n exp(-gap x)
  double factor(double x, int order) const {
    const double decay = std::exp(-gap_ * x);
    if (order == 0) return ratio_ == -1.0 ? -std::expm1(-gap_ * x) : 1.0 + ratio_ * decay;
    const double a = order == 1 ? upper_ : upper_ * upper_;
    const double b = order == 1 ? lower_ : lower_ * lower_;
    return a + ratio_ * b * decay;
  }

  LevyModel model_;
  double q_;
  double phi_ = 0.0;
  double upper_ = 0.0;
  double lower_ = 0.0;
  double gap_ = 0.0;
  double lead_ = 0.0;
  double ratio_ = 0.0;
  double coeff_plus_ = 0.0;
  double coeff_minus_ = 0.0;
  bool vanishes_at_zero_ = false;
};

/// Free-function form of ScaleFunction evaluation.
inline double scale_w(const ScaleFunction& sf, double x, int order) { return sf(x, order); }

inline double w_log_derivative(const ScaleFunction& sf, double x) { return sf.log_derivative(x); }

}  // namespace drawdown_tax
