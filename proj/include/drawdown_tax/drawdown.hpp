#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "drawdown_tax/errors.hpp"
#include "drawdown_tax/levy_models.hpp"

namespace drawdown_tax {

/// xi(x) = k x - d with k < 1 and d >= 0.
struct LinearDrawdown {
  double k = 0.0;
  double d = 0.0;
};

/// C1 draw-down function given by knots (x, xi(x), xi'(x)) and cubic
/// Hermite interpolation between them.
class TabulatedDrawdown {
 public:
  struct Knot {
    double x;
    double xi;
    double xi_prime;
  };

  explicit TabulatedDrawdown(std::vector<Knot> knots) : knots_(std::move(knots)) {
    if (knots_.size() < 2) throw DomainError("tabulated xi: need at least two knots");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      const auto& k = knots_[i];
      if (!std::isfinite(k.x) || !std::isfinite(k.xi) || !std::isfinite(k.xi_prime))
        throw DomainError("tabulated xi: non-finite knot value");
      if (i > 0 && !(k.x > knots_[i - 1].x))
        throw DomainError("tabulated xi: knot abscissae must be strictly increasing");
      if (!(k.xi < k.x)) throw DomainError("tabulated xi: xi(y) < y violated at a knot");
    }
    if (knots_.front().x < 0.0) throw DomainError("tabulated xi: knots must lie in [0, inf)");
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
      const double mid = 0.5 * (knots_[i].x + knots_[i + 1].x);
      if (!(value(mid) < mid)) throw DomainError("tabulated xi: xi(y) < y violated at a midpoint");
    }
  }

  /// Reads a CSV with header `x,xi,xi_prime`; lines starting with '#' are skipped.
  static TabulatedDrawdown from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("tabulated xi: cannot open " + path);
    std::vector<Knot> knots;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (!header_seen) {
        header_seen = true;
        if (line.find_first_not_of("0123456789+-.eE, \t\r") != std::string::npos) continue;
      }
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      Knot k{};
      if (!(row >> k.x >> k.xi >> k.xi_prime))
        throw DomainError("tabulated xi: malformed row '" + line + "'");
      knots.push_back(k);
    }
    return TabulatedDrawdown(std::move(knots));
  }

  const std::vector<Knot>& knots() const noexcept { return knots_; }
  double lower() const noexcept { return knots_.front().x; }
  double upper() const noexcept { return knots_.back().x; }

  double value(double x) const {
    const auto [i, t, h] = locate(x);
    const Knot& a = knots_[i];
    const Knot& b = knots_[i + 1];
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * a.xi + (t3 - 2 * t2 + t) * h * a.xi_prime +
           (-2 * t3 + 3 * t2) * b.xi + (t3 - t2) * h * b.xi_prime;
  }

  /// Analytic derivative of the Hermite interpolant; equals the stored
  /// knot derivatives at the knots.
  double derivative(double x) const {
    const auto [i, t, h] = locate(x);
    const Knot& a = knots_[i];
    const Knot& b = knots_[i + 1];
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * a.xi + (6 * t - 6 * t2) * b.xi) / h +
           (3 * t2 - 4 * t + 1) * a.xi_prime + (3 * t2 - 2 * t) * b.xi_prime;
  }

  /// Largest |xi'| and |1 - xi'| over the knots, used for tail bounds.
  double slope_bound() const {
    double m = 0.0;
    for (const auto& k : knots_) m = std::max(m, std::abs(k.xi_prime) + std::abs(1.0 - k.xi_prime));
    return m;
  }

 private:
  struct Location {
    std::size_t index;
    double t;
    double h;
  };

  Location locate(double x) const {
    if (!(x >= lower() && x <= upper()))
      throw DomainError("tabulated xi: x=" + std::to_string(x) + " outside knot range");
    auto it = std::upper_bound(knots_.begin(), knots_.end(), x,
                               [](double v, const Knot& k) { return v < k.x; });
    std::size_t i = it == knots_.begin() ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
    if (i + 1 >= knots_.size()) i = knots_.size() - 2;
    const double h = knots_[i + 1].x - knots_[i].x;
    return {i, (x - knots_[i].x) / h, h};
  }

  std::vector<Knot> knots_;
};

using DrawdownFn = std::variant<LinearDrawdown, TabulatedDrawdown>;

inline std::vector<std::string> drawdown_violations(const DrawdownFn& f) {
  std::vector<std::string> out;
  if (const auto* lin = std::get_if<LinearDrawdown>(&f)) {
    if (!(lin->k < 1.0) || !std::isfinite(lin->k)) out.emplace_back("xi.k must be < 1");
    if (!(lin->d >= 0.0) || !std::isfinite(lin->d)) out.emplace_back("xi.d must be >= 0");
  }
  return out;
}

inline double xi(const DrawdownFn& f, double x) {
  if (!(x >= 0.0)) throw DomainError("xi: x must be >= 0");
  if (const auto* lin = std::get_if<LinearDrawdown>(&f)) return lin->k * x - lin->d;
  return std::get<TabulatedDrawdown>(f).value(x);
}

inline double xi_prime(const DrawdownFn& f, double x) {
  if (!(x >= 0.0)) throw DomainError("xi': x must be >= 0");
  if (const auto* lin = std::get_if<LinearDrawdown>(&f)) return lin->k;
  return std::get<TabulatedDrawdown>(f).derivative(x);
}

/// x - xi(x), the allowed distance below the running maximum.
inline double xi_bar(const DrawdownFn& f, double x) {
  if (const auto* lin = std::get_if<LinearDrawdown>(&f)) {
    if (!(x >= 0.0)) throw DomainError("xi_bar: x must be >= 0");
    return (1.0 - lin->k) * x + lin->d;
  }
  return x - xi(f, x);
}

inline bool is_linear(const DrawdownFn& f) noexcept { return std::holds_alternative<LinearDrawdown>(f); }

/// Bound on |xi'| + |1 - xi'|, which bounds |g| since W''W/W'^2 <= 1.
inline double slope_bound(const DrawdownFn& f) {
  if (const auto* lin = std::get_if<LinearDrawdown>(&f)) return std::abs(lin->k) + std::abs(1.0 - lin->k);
  return std::get<TabulatedDrawdown>(f).slope_bound();
}

/// g(x) = xi'(x) + (1 - xi'(x)) W''(z) W(z) / W'(z)^2 at z = x - xi(x).
inline double g_fn(const ScaleFunction& sf, const DrawdownFn& f, double x) {
  const double z = xi_bar(f, x);
  if (!(z > 0.0)) throw SingularInput("g: x - xi(x) must be > 0");
  const double slope = xi_prime(f, x);
  return slope + (1.0 - slope) * sf.curvature_ratio(z);
}

enum class SignPatternKind { NegToPos, PosToNeg, AllNonNeg, AllNonPos, Violated };

inline const char* to_string(SignPatternKind k) {
  switch (k) {
    case SignPatternKind::NegToPos: return "NEG_TO_POS";
    case SignPatternKind::PosToNeg: return "POS_TO_NEG";
    case SignPatternKind::AllNonNeg: return "ALL_NONNEG";
    case SignPatternKind::AllNonPos: return "ALL_NONPOS";
    case SignPatternKind::Violated: return "VIOLATED";
  }
  return "?";
}

struct SignPattern {
  double x0 = 0.0;
  SignPatternKind kind = SignPatternKind::AllNonNeg;
  double search_max = 0.0;
  int sign_changes = 0;
};

struct SignScanOptions {
  double search_max = 0.0;  // <= 0 selects 50 / Phi(q), capped at the last knot of a table
  int uniform_points = 512;
  int log_points = 128;
  double zero_tolerance = 1e-12;
  double bisection_width = 1e-12;
};

/// Scan grid: uniform points on (0, search_max] and log-spaced points
/// from 1e-8/Phi(q) up to the first uniform point.
inline std::vector<double> sign_scan_grid(double phi_q, double search_max, int uniform_points,
                                          int log_points) {
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(uniform_points + log_points));
  const double step = search_max / uniform_points;
  const double start = 1e-8 / phi_q;
  if (start < step) {
    const double ratio = std::log(step / start);
    for (int i = 0; i < log_points; ++i)
      grid.push_back(start * std::exp(ratio * i / log_points));
  }
  for (int i = 1; i <= uniform_points; ++i) grid.push_back(step * i);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

/// Locates the point x0 where g changes sign (at most once) on
/// (0, search_max]. Values with |g| below the zero tolerance count as zero.
inline SignPattern find_sign_change(const ScaleFunction& sf, const DrawdownFn& f,
                                    const SignScanOptions& opt = {}) {
  double search_max = opt.search_max > 0.0 ? opt.search_max : 50.0 / sf.phi_q();
  if (const auto* t = std::get_if<TabulatedDrawdown>(&f); t && opt.search_max <= 0.0)
    search_max = std::min(search_max, t->knots().back().x);
  auto grid = sign_scan_grid(sf.phi_q(), search_max, opt.uniform_points, opt.log_points);
  // Points with xi_bar(x) <= 0 lie outside the domain of g and are skipped.
  auto sign_of = [&](double v) { return std::abs(v) < opt.zero_tolerance ? 0 : (v > 0 ? 1 : -1); };

  int first_sign = 0;
  int last_sign = 0;
  int changes = 0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double last_nonzero_x = 0.0;
  for (double x : grid) {
    if (!(xi_bar(f, x) > 0.0)) continue;
    const int s = sign_of(g_fn(sf, f, x));
    if (s == 0) continue;
    if (first_sign == 0) first_sign = s;
    if (last_sign != 0 && s != last_sign) {
      ++changes;
      if (changes == 1) {
        bracket_lo = last_nonzero_x;
        bracket_hi = x;
      }
    }
    last_sign = s;
    last_nonzero_x = x;
  }

  SignPattern out;
  out.search_max = search_max;
  out.sign_changes = changes;
  if (changes == 0) {
    if (first_sign < 0) {
      out.kind = SignPatternKind::AllNonPos;
      out.x0 = std::numeric_limits<double>::infinity();
    } else {
      out.kind = SignPatternKind::AllNonNeg;
      out.x0 = 0.0;
    }
    return out;
  }
  if (changes >= 2) {
    out.kind = SignPatternKind::Violated;
    out.x0 = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const int low_sign = first_sign;
  double lo = bracket_lo;
  double hi = bracket_hi;
  while (hi - lo > opt.bisection_width * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const int s = sign_of(g_fn(sf, f, mid));
    if (s == low_sign) lo = mid; else hi = mid;
  }
  out.x0 = 0.5 * (lo + hi);
  out.kind = low_sign < 0 ? SignPatternKind::NegToPos : SignPatternKind::PosToNeg;
  return out;
}

}  // namespace drawdown_tax
