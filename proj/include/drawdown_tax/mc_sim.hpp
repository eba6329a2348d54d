#pragma once

// Monte-Carlo simulation of the taxed surplus stopped at the general
// draw-down time. Paths are tracked in untaxed coordinates: with X-bar
// the running maximum of X, the taxed surplus is
//   U = X - (X-bar - gamma_bar_x(X-bar)),
// and U < xi(U-bar) is equivalent to X < X-bar - xi_bar(gamma_bar_x(X-bar)).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "drawdown_tax/drawdown.hpp"
#include "drawdown_tax/errors.hpp"
#include "drawdown_tax/levy_models.hpp"
#include "drawdown_tax/philox.hpp"
#include "drawdown_tax/taxed_exit.hpp"

namespace drawdown_tax {

struct SimConfig {
  std::size_t n_paths = 100000;
  double dt = 1e-4;         // smallest Brownian step, used next to a boundary
  double max_step = 1.0;    // largest Brownian step, used far from every boundary
  double step_scale = 5.0;  // sigma sqrt(step) <= distance / step_scale
  double horizon = 0.0;     // <= 0 selects log(1e6) / q
  std::uint64_t seed = 12345;
  std::optional<double> barrier;  // level a of the taxed surplus
  std::size_t chunk = 4096;
  unsigned threads = 0;  // 0: hardware concurrency, capped by DRAWDOWN_TAX_THREADS
};

inline std::vector<std::string> sim_violations(const SimConfig& c) {
  std::vector<std::string> out;
  if (c.n_paths < 1) out.emplace_back("simulation.paths must be >= 1");
  if (!(c.dt > 0.0)) out.emplace_back("simulation.dt must be > 0");
  if (!(c.max_step >= c.dt)) out.emplace_back("simulation.max_step must be >= simulation.dt");
  if (!(c.horizon >= 0.0)) out.emplace_back("simulation.horizon must be > 0 (or 0 for the default)");
  if (c.chunk < 1) out.emplace_back("simulation.chunk must be >= 1");
  return out;
}

struct PathRecord {
  double exit_time = std::numeric_limits<double>::infinity();      // tau_a^+
  double drawdown_time = std::numeric_limits<double>::infinity();  // tau_xi^gamma
  double discounted_tax = 0.0;
  double running_max = 0.0;  // untaxed running maximum at the stopping time
  bool truncated = false;
};

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n_effective = 0;
  double truncated_fraction = 0.0;
  std::uint64_t seed = 0;
};

inline double default_horizon(double q) { return std::log(1e6) / q; }

namespace detail {

struct PathGeometry {
  const TaxStrategy* s;
  const DrawdownFn* f;
  double x0;

  // Draw-down level of X given the untaxed running maximum m.
  double level(double m) const { return m - xi_bar(*f, gamma_bar(*s, x0, m)); }
};

// Discounted tax over the rise of the running maximum from m0 to m1 at
// constant speed `speed`, starting at time t0: the integral of
// exp(-q s) gamma(m(s)) dm(s), exact piece by piece.
inline double linear_rise_tax(const TaxStrategy& s, double q, double t0, double m0, double m1, double speed) {
  double total = 0.0;
  double left = m0;
  const auto& bp = s.breakpoints();
  auto it = std::upper_bound(bp.begin(), bp.end(), m0);
  while (left < m1) {
    const double right = it == bp.end() ? m1 : std::min(*it, m1);
    const double gamma = s(left);
    if (gamma > 0.0) {
      const double ta = t0 + (left - m0) / speed;
      const double tb = t0 + (right - m0) / speed;
      total += gamma * speed * std::exp(-q * ta) * (-std::expm1(-q * (tb - ta))) / q;
    }
    left = right;
    if (it != bp.end()) ++it;
  }
  return total;
}

// integral_{m0}^{m1} gamma(y) dy.
inline double tax_on_rise(const TaxStrategy& s, double m0, double m1) {
  return (m1 - m0) - (gamma_bar(s, m0, m1) - m0);
}

inline PathRecord brownian_path(const BrownianDrift& bm, double q, const PathGeometry& geo,
                                const SimConfig& cfg, double horizon, double barrier_x, Philox4x32& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  PathRecord rec;
  double t = 0.0;
  double x = geo.x0;
  double m = geo.x0;
  double lvl = geo.level(m);
  const double s2 = bm.sigma * bm.sigma;
  while (t < horizon) {
    const double dist = std::min(x - lvl, barrier_x - x);
    const double scaled = dist / (cfg.step_scale * bm.sigma);
    const double step = std::min({std::max(scaled * scaled, cfg.dt), cfg.max_step, horizon - t});
    const double xn = x + bm.mu * step + bm.sigma * std::sqrt(step) * normal(rng);
    // Maximum of the Brownian bridge from x to xn over the step.
    const double u_max = 1.0 - uniform(rng);
    const double bridge_max = 0.5 * (x + xn + std::sqrt((xn - x) * (xn - x) - 2.0 * s2 * step * std::log(u_max)));
    // Draw-down against the level held at its start-of-step value.
    bool down = xn < lvl;
    if (!down) {
      const double p_cross = std::exp(-2.0 * (x - lvl) * (xn - lvl) / (s2 * step));
      down = uniform(rng) < p_cross;
    }
    if (down) {
      rec.drawdown_time = t + step;
      rec.running_max = m;
      return rec;
    }
    if (bridge_max > m) {
      const double top = std::min(bridge_max, barrier_x);
      rec.discounted_tax += std::exp(-q * (t + 0.5 * step)) * tax_on_rise(*geo.s, m, top);
      m = top;
      if (bridge_max >= barrier_x) {
        rec.exit_time = t + step;
        rec.running_max = m;
        return rec;
      }
      lvl = geo.level(m);
      if (xn < lvl) {
        rec.drawdown_time = t + step;
        rec.running_max = m;
        return rec;
      }
    }
    x = xn;
    t += step;
  }
  rec.truncated = true;
  rec.running_max = m;
  return rec;
}

inline PathRecord cramer_lundberg_path(const CramerLundberg& cl, double q, const PathGeometry& geo,
                                       double horizon, double barrier_x, Philox4x32& rng) {
  std::exponential_distribution<double> arrival(cl.intensity);
  std::exponential_distribution<double> claim(cl.claim_rate);
  PathRecord rec;
  double t = 0.0;
  double x = geo.x0;
  double m = geo.x0;
  while (true) {
    const double wait = arrival(rng);
    const double t_end = std::min(t + wait, horizon);
    const double x_end = x + cl.premium * (t_end - t);
    if (x_end > m) {
      const double t_max = t + (m - x) / cl.premium;  // time the old maximum is regained
      const double top = std::min(x_end, barrier_x);
      rec.discounted_tax += linear_rise_tax(*geo.s, q, t_max, m, top, cl.premium);
      if (x_end >= barrier_x) {
        rec.exit_time = t_max + (barrier_x - m) / cl.premium;
        rec.running_max = barrier_x;
        return rec;
      }
      m = x_end;
    }
    if (t + wait >= horizon) {
      rec.truncated = true;
      rec.running_max = m;
      return rec;
    }
    t += wait;
    x = x_end - claim(rng);
    if (x < geo.level(m)) {
      rec.drawdown_time = t;
      rec.running_max = m;
      return rec;
    }
  }
}

struct NeumaierSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) comp += (sum - t) + v; else comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

struct ChunkSums {
  NeumaierSum s1;
  NeumaierSum s2;
  std::size_t truncated = 0;
};

inline unsigned worker_count(unsigned requested, std::size_t chunks) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DRAWDOWN_TAX_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, chunks));
}

}  // namespace detail

/// One path of the taxed surplus started at x0, stream `path_index` of
/// the configured seed. `s` is a function of the untaxed running maximum.
inline PathRecord simulate_taxed_path(const LevyModel& model, double q, const TaxStrategy& s, const DrawdownFn& f,
                                      double x0, const SimConfig& cfg, std::uint64_t path_index = 0) {
  if (!(x0 >= 0.0)) throw DomainError("simulate_taxed_path: x0 must be >= 0");
  if (!(q > 0.0)) throw DomainError("simulate_taxed_path: q must be > 0");
  const detail::PathGeometry geo{&s, &f, x0};
  const double horizon = cfg.horizon > 0.0 ? cfg.horizon : default_horizon(q);
  const double barrier_x = cfg.barrier ? gamma_bar_inv(s, x0, std::max(*cfg.barrier, x0))
                                       : std::numeric_limits<double>::infinity();
  PathRecord rec;
  if (barrier_x <= x0) {
    rec.exit_time = 0.0;
    rec.running_max = x0;
    return rec;
  }
  if (!(geo.level(x0) < x0)) {
    rec.drawdown_time = 0.0;
    rec.running_max = x0;
    return rec;
  }
  Philox4x32 rng(cfg.seed, path_index);
  if (const auto* bm = std::get_if<BrownianDrift>(&model))
    return detail::brownian_path(*bm, q, geo, cfg, horizon, barrier_x, rng);
  return detail::cramer_lundberg_path(std::get<CramerLundberg>(model), q, geo, horizon, barrier_x, rng);
}

/// Mean and standard error of value(path) over cfg.n_paths paths. The
/// result does not depend on the number of threads.
template <class Value>
McEstimate estimate(const LevyModel& model, double q, const TaxStrategy& s, const DrawdownFn& f, double x0,
                    const SimConfig& cfg, const Value& value) {
  if (auto v = sim_violations(cfg); !v.empty()) throw ConfigError(v);
  validate(model);
  const std::size_t n = cfg.n_paths;
  const std::size_t chunks = (n + cfg.chunk - 1) / cfg.chunk;
  std::vector<detail::ChunkSums> sums(chunks);
  auto run_chunk = [&](std::size_t c) {
    auto& out = sums[c];
    const std::size_t end = std::min(n, (c + 1) * cfg.chunk);
    for (std::size_t i = c * cfg.chunk; i < end; ++i) {
      const PathRecord rec = simulate_taxed_path(model, q, s, f, x0, cfg, i);
      const double v = value(rec);
      out.s1.add(v);
      out.s2.add(v * v);
      if (rec.truncated) ++out.truncated;
    }
  };
  const unsigned workers = detail::worker_count(cfg.threads, chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  detail::NeumaierSum s1;
  detail::NeumaierSum s2;
  std::size_t truncated = 0;
  for (const auto& c : sums) {
    s1.add(c.s1.value());
    s2.add(c.s2.value());
    truncated += c.truncated;
  }
  McEstimate est;
  est.n_effective = n;
  est.seed = cfg.seed;
  est.mean = s1.value() / static_cast<double>(n);
  if (n > 1) {
    const double var = std::max(0.0, (s2.value() - static_cast<double>(n) * est.mean * est.mean) /
                                         static_cast<double>(n - 1));
    est.stderr_ = std::sqrt(var / static_cast<double>(n));
  }
  est.truncated_fraction = static_cast<double>(truncated) / static_cast<double>(n);
  return est;
}

/// E_x[exp(-q tau_a^+); tau_a^+ < tau_xi^gamma].
inline McEstimate estimate_exit(const LevyModel& model, double q, const TaxStrategy& s, const DrawdownFn& f,
                                double x, double a, SimConfig cfg) {
  if (!(a >= x)) throw DomainError("estimate_exit: need a >= x");
  cfg.barrier = a;
  if (a == x) return {1.0, 0.0, cfg.n_paths, 0.0, cfg.seed};
  return estimate(model, q, s, f, x, cfg, [q](const PathRecord& r) {
    return r.exit_time < r.drawdown_time ? std::exp(-q * r.exit_time) : 0.0;
  });
}

/// Expected discounted tax paid until the draw-down time, or until the
/// barrier when cfg.barrier is set.
inline McEstimate estimate_tax(const LevyModel& model, double q, const TaxStrategy& s, const DrawdownFn& f,
                               double x, const SimConfig& cfg) {
  if (s.is_zero()) return {0.0, 0.0, cfg.n_paths, 0.0, cfg.seed};
  return estimate(model, q, s, f, x, cfg, [](const PathRecord& r) { return r.discounted_tax; });
}

}  // namespace drawdown_tax
