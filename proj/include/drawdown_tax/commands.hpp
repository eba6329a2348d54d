#pragma once

// Subcommands of the drawdown-tax tool. Each writes its primary output to
// `out` and returns the process exit code.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "drawdown_tax/config.hpp"
#include "drawdown_tax/drawdown.hpp"
#include "drawdown_tax/levy_models.hpp"
#include "drawdown_tax/mc_sim.hpp"
#include "drawdown_tax/optimal_tax.hpp"
#include "drawdown_tax/quadrature.hpp"
#include "drawdown_tax/taxed_exit.hpp"

namespace drawdown_tax {

enum ExitCode : int { kOk = 0, kUsage = 1, kAssumption = 2, kGateFailure = 3 };

namespace detail {

// Shortest round-trip decimal form, so CSV output is byte-stable.
inline std::string fmt_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::string& subcommand, const std::vector<std::string>& columns)
      : out_(&out) {
    *out_ << "# drawdown-tax v" << kVersion << ' ' << subcommand << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) *out_ << (i ? "," : "") << columns[i];
    *out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) *out_ << (i ? "," : "") << fmt_number(values[i]);
    *out_ << '\n';
  }

 private:
  std::ostream* out_;
};

inline std::ofstream open_output(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream f(path);
  if (!f) throw ConfigError({"cannot write " + path.string()});
  return f;
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json strategy_json(const TaxStrategy& s) {
  return {{"breakpoints", s.breakpoints()}, {"values", s.values()}};
}

inline TaxStrategy configured_strategy(const RunConfig& cfg) {
  return cfg.strategy ? *cfg.strategy : TaxStrategy::constant(cfg.gamma2, cfg.gamma1, cfg.gamma2);
}

inline nlohmann::json report_json(const SolveReport& r) {
  return {
      {"case", to_string(r.case_label)},
      {"sign_pattern", to_string(r.pattern.kind)},
      {"x0", finite_or_null(r.x0)},
      {"switch_point", r.switch_point ? nlohmann::json(*r.switch_point) : nlohmann::json()},
      {"witness", r.witness ? nlohmann::json(*r.witness) : nlohmann::json()},
      {"g_integral_at_probe_start", r.g_at_zero},
      {"probe_start", r.probe_start},
      {"gamma_star", strategy_json(r.gamma_star)},
      {"note", r.note},
  };
}

}  // namespace detail

/// CSV of x, W, W', W'', W'/W on the configured grid.
inline int cmd_scale(const RunConfig& cfg, std::ostream& out) {
  const ScaleFunction sf(cfg.model, cfg.q);
  detail::CsvWriter csv(out, "scale", {"x", "W", "W_prime", "W_double_prime", "W_log_derivative"});
  for (double x : cfg.grid.values()) {
    const double w = sf(x, 0);
    const double w1 = sf(x, 1);
    const double ratio = x > 0.0 ? sf.log_derivative(x) : w1 / w;
    csv.row({x, w, w1, sf(x, 2), ratio});
  }
  return kOk;
}

/// JSON report on `out` plus solve_value.csv (x, f, gamma_star) in the output directory.
inline int cmd_solve(const RunConfig& cfg, std::ostream& out) {
  const ScaleFunction sf(cfg.model, cfg.q);
  const SolveReport r = solve(sf, cfg.xi, cfg.gamma1, cfg.gamma2);
  const auto xs = cfg.grid.values();
  const HjbResidual hjb = hjb_residual(r, xs);
  const double limit_x = 50.0 / sf.phi_q();
  nlohmann::json j = detail::report_json(r);
  j["hjb_residual_fd"] = hjb.finite_difference;
  j["hjb_residual_analytic"] = hjb.analytic;
  j["upper_bound"] = tax_upper_bound(sf, cfg.gamma2);
  j["limit_x"] = limit_x;
  j["limit_estimate"] = optimal_value(r, limit_x);
  j["phi_q"] = sf.phi_q();

  auto file = detail::open_output(cfg.output_dir, "solve_value.csv");
  detail::CsvWriter csv(file, "solve", {"x", "f", "gamma_star"});
  for (double x : xs)
    if (xi_bar(cfg.xi, x) > 0.0) csv.row({x, optimal_value(r, x), r.gamma_star(x)});
  j["value_csv"] = (std::filesystem::path(cfg.output_dir) / "solve_value.csv").string();
  out << j.dump(2) << '\n';
  return kOk;
}

/// CSV of x, exit_laplace(x, a), tax_return(x), gamma2/Phi(q) for the
/// configured strategy; a is simulation.barrier or the grid end.
inline int cmd_curve(const RunConfig& cfg, std::ostream& out) {
  const ScaleFunction sf(cfg.model, cfg.q);
  const TaxStrategy s = detail::configured_strategy(cfg);
  const double a = cfg.sim.barrier.value_or(cfg.grid.x_max);
  const double bound = tax_upper_bound(sf, s.gamma2());
  detail::CsvWriter csv(out, "curve", {"x", "exit_laplace", "tax_return", "upper_bound"});
  for (double x : cfg.grid.values()) {
    if (!(xi_bar(cfg.xi, x) > 0.0)) continue;
    const double exit = x <= a ? exit_laplace(sf, s, cfg.xi, x, a) : std::numeric_limits<double>::quiet_NaN();
    csv.row({x, exit, tax_return(sf, s, cfg.xi, x), bound});
  }
  return kOk;
}

/// Monte-Carlo estimate as JSON {mean, stderr, n, truncated_fraction, seed}.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const ScaleFunction sf(cfg.model, cfg.q);
  TaxStrategy s = detail::configured_strategy(cfg);
  if (cfg.use_optimal) s = running_max_form(solve(sf, cfg.xi, cfg.gamma1, cfg.gamma2).gamma_star, cfg.x);
  McEstimate est;
  if (cfg.quantity == "exit") est = estimate_exit(cfg.model, cfg.q, s, cfg.xi, cfg.x, *cfg.sim.barrier, cfg.sim);
  else est = estimate_tax(cfg.model, cfg.q, s, cfg.xi, cfg.x, cfg.sim);
  nlohmann::json j = {{"quantity", cfg.quantity},
                      {"x", cfg.x},
                      {"mean", est.mean},
                      {"stderr", est.stderr_},
                      {"n", est.n_effective},
                      {"truncated_fraction", est.truncated_fraction},
                      {"seed", est.seed},
                      {"strategy", detail::strategy_json(s)}};
  if (cfg.sim.barrier) j["barrier"] = *cfg.sim.barrier;
  out << j.dump(2) << '\n';
  return kOk;
}

namespace detail {

struct GateList {
  nlohmann::json items = nlohmann::json::array();
  bool all = true;

  void add(const std::string& name, bool pass, double measured, double tolerance, nlohmann::json extra = {}) {
    nlohmann::json g = {{"name", name}, {"pass", pass}, {"measured", finite_or_null(measured)},
                        {"tolerance", tolerance}};
    if (!extra.is_null()) g["detail"] = std::move(extra);
    items.push_back(std::move(g));
    all = all && pass;
  }
};

}  // namespace detail

/// Runs the analytic and Monte-Carlo gates for the configuration and
/// prints one JSON record per gate. Any failing gate gives exit code 3.
inline int cmd_verify(const RunConfig& cfg, std::ostream& out) {
  const ScaleFunction sf(cfg.model, cfg.q);
  const double phi_q = sf.phi_q();
  detail::GateList gates;

  const double plug = std::abs(laplace_exponent(cfg.model, phi_q) - cfg.q);
  gates.add("phi_plug_back", plug < 1e-10, plug, 1e-10);
  const double newton = std::abs(phi_q - phi_newton(cfg.model, cfg.q));
  gates.add("phi_newton_agreement", newton < 1e-10, newton, 1e-10);

  double worst_laplace = 0.0;
  for (double m : {1.5, 2.0, 3.0}) {
    const double theta = m * phi_q;
    // e^{-theta x} W(x) decays like e^{-(theta - Phi) x}.
    const double decay = theta - phi_q;
    const double T = 60.0 / decay;
    const double num = integrate_panels([&](double x) { return std::exp(-theta * x) * sf(x, 0); },
                                        panel_edges(0.0, T, {}, 1.0 / decay), QuadTolerance{1e-14, 1e-12, 4000});
    const double exact = 1.0 / (laplace_exponent(cfg.model, theta) - cfg.q);
    worst_laplace = std::max(worst_laplace, std::abs(num - exact) / exact);
  }
  gates.add("scale_laplace_identity", worst_laplace < 1e-6, worst_laplace, 1e-6);

  double worst_ratio = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 1000; ++i) worst_ratio = std::min(worst_ratio, sf.log_derivative(0.1 * i) - phi_q);
  gates.add("log_derivative_lower_bound", worst_ratio >= -1e-12, worst_ratio, -1e-12);

  // AssumptionViolated propagates and maps to its own exit code.
  const SolveReport r = solve(sf, cfg.xi, cfg.gamma1, cfg.gamma2);
  gates.add("sign_pattern", true, r.x0, 0.0, {{"pattern", to_string(r.pattern.kind)}, {"case", to_string(r.case_label)}});
  if (r.switch_point) {
    const double root = std::abs(G_gamma(sf, cfg.xi, r.outer_gamma(), *r.switch_point));
    gates.add("switch_point_root", root < 1e-8, root, 1e-8);
  }

  const auto xs = cfg.grid.values();
  const HjbResidual hjb = hjb_residual(r, xs);
  gates.add("hjb_analytic", hjb.analytic < 1e-12, hjb.analytic, 1e-12);
  gates.add("hjb_finite_difference", hjb.finite_difference < 1e-5, hjb.finite_difference, 1e-5);

  const double bound = tax_upper_bound(sf, cfg.gamma2);
  double excess = -std::numeric_limits<double>::infinity();
  for (double x : xs)
    if (xi_bar(cfg.xi, x) > 0.0) excess = std::max(excess, optimal_value(r, x) - bound);
  gates.add("value_upper_bound", excess <= 1e-10, excess, 1e-10);

  double worst_tax = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double x = cfg.grid.x_min + (cfg.grid.x_max - cfg.grid.x_min) * (i + 0.5) / 10.0;
    if (!(xi_bar(cfg.xi, x) > 0.0)) continue;
    const double direct = tax_return(sf, running_max_form(r.gamma_star, x), cfg.xi, x);
    worst_tax = std::max(worst_tax, std::abs(direct - optimal_value(r, x)));
  }
  gates.add("tax_return_matches_value", worst_tax < 1e-7, worst_tax, 1e-7);

  const double x = cfg.x;
  const double a = cfg.sim.barrier.value_or(x + 2.0);
  const TaxStrategy s_exit = detail::configured_strategy(cfg);
  const McEstimate mc_exit = estimate_exit(cfg.model, cfg.q, s_exit, cfg.xi, x, a, cfg.sim);
  const double an_exit = exit_laplace(sf, s_exit, cfg.xi, x, a);
  const double z_exit = mc_exit.stderr_ > 0 ? std::abs(mc_exit.mean - an_exit) / mc_exit.stderr_ : 0.0;
  gates.add("mc_exit_laplace", z_exit <= 3.0, z_exit, 3.0,
            {{"mc", mc_exit.mean}, {"stderr", mc_exit.stderr_}, {"analytic", an_exit}, {"seed", mc_exit.seed}});

  SimConfig tax_cfg = cfg.sim;
  tax_cfg.barrier.reset();
  const McEstimate mc_tax =
      estimate_tax(cfg.model, cfg.q, running_max_form(r.gamma_star, x), cfg.xi, x, tax_cfg);
  const double an_tax = optimal_value(r, x);
  const double z_tax = mc_tax.stderr_ > 0 ? std::abs(mc_tax.mean - an_tax) / mc_tax.stderr_ : 0.0;
  gates.add("mc_optimal_tax", z_tax <= 3.0, z_tax, 3.0,
            {{"mc", mc_tax.mean}, {"stderr", mc_tax.stderr_}, {"analytic", an_tax}, {"seed", mc_tax.seed}});

  nlohmann::json j = {{"all_pass", gates.all}, {"gates", gates.items}};
  out << j.dump(2) << '\n';
  return gates.all ? kOk : kGateFailure;
}

/// Writes fig1_g.csv, fig2_G2.csv, fig3_value.csv and fig4_value.csv to the
/// output directory. Model, q and gamma pair come from the configuration.
inline int cmd_reproduce(const RunConfig& cfg, std::ostream& out) {
  const ScaleFunction sf(cfg.model, cfg.q);
  const std::vector<double> ks{-10.0, -5.0, -1.0, 0.0, 0.1};
  std::vector<std::string> written;

  {
    auto file = detail::open_output(cfg.output_dir, "fig1_g.csv");
    std::vector<std::string> cols{"x"};
    for (double k : ks) cols.push_back("g_k" + detail::fmt_number(k));
    detail::CsvWriter csv(file, "reproduce", cols);
    for (int i = 1; i <= 400; ++i) {
      const double x = 0.05 * i;
      std::vector<double> row{x};
      for (double k : ks) row.push_back(g_fn(sf, LinearDrawdown{k, 1.0}, x));
      csv.row(row);
    }
    written.push_back("fig1_g.csv");
  }
  {
    auto file = detail::open_output(cfg.output_dir, "fig2_G2.csv");
    detail::CsvWriter csv(file, "reproduce", {"x", "G2_k0.1", "G2_k-1"});
    for (int i = 0; i <= 150; ++i) {
      const double x = i == 0 ? 1e-6 / sf.phi_q() : 0.01 * i;
      csv.row({x, G2(sf, LinearDrawdown{0.1, 1.0}, cfg.gamma2, x), G2(sf, LinearDrawdown{-1.0, 1.0}, cfg.gamma2, x)});
    }
    written.push_back("fig2_G2.csv");
  }
  for (const auto& [name, k] : {std::pair{"fig3_value.csv", 0.1}, std::pair{"fig4_value.csv", -1.0}}) {
    const SolveReport r = solve(sf, LinearDrawdown{k, 1.0}, cfg.gamma1, cfg.gamma2);
    auto file = detail::open_output(cfg.output_dir, name);
    detail::CsvWriter csv(file, "reproduce", {"x", "f", "gamma_star"});
    for (int i = 0; i <= 400; ++i) {
      const double x = 0.05 * i;
      csv.row({x, optimal_value(r, x), r.gamma_star(x)});
    }
    written.push_back(name);
  }
  nlohmann::json j = {{"output_dir", cfg.output_dir}, {"files", written}};
  out << j.dump(2) << '\n';
  return kOk;
}

}  // namespace drawdown_tax
