// drawdown-tax: optimal loss-carry-forward taxation under general draw-down.
//
//   drawdown-tax <scale|solve|curve|verify|simulate|reproduce> [--config FILE] [overrides]
//
// Exit codes: 0 success, 1 usage or config error, 2 g violates the
// single-sign-change assumption, 3 a verification gate failed.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "drawdown_tax/commands.hpp"
#include "drawdown_tax/config.hpp"
#include "drawdown_tax/errors.hpp"

namespace {

using drawdown_tax::ExitCode;

struct Overrides {
  std::string config;
  std::optional<std::string> family;
  std::map<std::string, double> numbers;  // "section.key" -> value
  std::optional<std::string> xi_table;
  std::optional<std::string> output;
  std::optional<std::string> quantity;
  std::optional<std::uint64_t> seed;
  bool optimal = false;
};

void set_path(nlohmann::json& j, const std::string& dotted, nlohmann::json value) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos) {
    j[dotted] = std::move(value);
    return;
  }
  j[dotted.substr(0, dot)][dotted.substr(dot + 1)] = std::move(value);
}

nlohmann::json merged_config(const Overrides& o) {
  nlohmann::json j = o.config.empty() ? drawdown_tax::default_config_json() : drawdown_tax::read_config_file(o.config);
  if (o.family && j.value("model", nlohmann::json::object()).value("family", "brownian") != *o.family)
    j["model"] = nlohmann::json{{"family", *o.family}};
  if (o.xi_table) j["xi"] = nlohmann::json{{"kind", "tabulated"}, {"path", *o.xi_table}};
  for (const auto& [path, v] : o.numbers) {
    if (path == "simulation.paths" || path == "grid.points" || path == "simulation.threads")
      set_path(j, path, static_cast<long long>(v));
    else
      set_path(j, path, v);
  }
  if (o.seed) set_path(j, "simulation.seed", *o.seed);
  if (o.output) set_path(j, "output.dir", *o.output);
  if (o.quantity) set_path(j, "simulation.quantity", *o.quantity);
  if (o.optimal) set_path(j, "simulation.optimal", true);
  return j;
}

void add_number(CLI::App& app, Overrides& o, const std::string& flag, const std::string& path,
                const std::string& help) {
  app.add_option_function<double>(flag, [&o, path](double v) { o.numbers[path] = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal loss-carry-forward taxation with general draw-down times"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string("drawdown-tax ") + drawdown_tax::kVersion);

  Overrides o;
  app.add_option("-c,--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--family", o.family, "model family: brownian or cramer_lundberg");
  add_number(app, o, "--mu", "model.mu", "Brownian drift");
  add_number(app, o, "--sigma", "model.sigma", "Brownian volatility");
  add_number(app, o, "--premium", "model.premium", "Cramer-Lundberg premium rate");
  add_number(app, o, "--intensity", "model.intensity", "Cramer-Lundberg claim intensity");
  add_number(app, o, "--claim-rate", "model.claim_rate", "reciprocal mean claim size");
  add_number(app, o, "--q", "q", "discount rate");
  add_number(app, o, "--k", "xi.k", "slope of the linear draw-down function");
  add_number(app, o, "--d", "xi.d", "offset of the linear draw-down function");
  app.add_option("--xi-table", o.xi_table, "CSV table x,xi,xi_prime for a tabulated draw-down function");
  add_number(app, o, "--gamma1", "control.gamma1", "lower tax rate");
  add_number(app, o, "--gamma2", "control.gamma2", "upper tax rate");
  add_number(app, o, "--x-min", "grid.x_min", "grid start");
  add_number(app, o, "--x-max", "grid.x_max", "grid end");
  add_number(app, o, "--points", "grid.points", "grid size");
  add_number(app, o, "--paths", "simulation.paths", "Monte-Carlo paths");
  add_number(app, o, "--dt", "simulation.dt", "smallest Brownian time step");
  add_number(app, o, "--max-step", "simulation.max_step", "largest Brownian time step");
  add_number(app, o, "--horizon", "simulation.horizon", "simulation horizon (0: log(1e6)/q)");
  app.add_option("--seed", o.seed, "Monte-Carlo seed");
  add_number(app, o, "--barrier", "simulation.barrier", "upper barrier a of the taxed surplus");
  add_number(app, o, "--x", "simulation.x", "starting surplus for simulate and verify");
  add_number(app, o, "--threads", "simulation.threads", "worker threads (0: all)");
  app.add_option("--quantity", o.quantity, "simulate: tax or exit");
  app.add_flag("--optimal", o.optimal, "simulate: use the optimal strategy");
  app.add_option("-o,--output", o.output, "output directory for CSV files");

  auto* scale = app.add_subcommand("scale", "CSV of W, W', W'' and W'/W on the grid");
  auto* solve = app.add_subcommand("solve", "case analysis, switch point and value function");
  auto* curve = app.add_subcommand("curve", "exit transform and tax return for the configured strategy");
  auto* verify = app.add_subcommand("verify", "analytic and Monte-Carlo gates");
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo estimate of exit transform or tax");
  auto* reproduce = app.add_subcommand("reproduce", "data for the g, G2 and value-function figures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ExitCode::kOk : ExitCode::kUsage;
  }

  try {
    const auto cfg = drawdown_tax::parse_config(merged_config(o));
    if (scale->parsed()) return drawdown_tax::cmd_scale(cfg, std::cout);
    if (solve->parsed()) return drawdown_tax::cmd_solve(cfg, std::cout);
    if (curve->parsed()) return drawdown_tax::cmd_curve(cfg, std::cout);
    if (verify->parsed()) return drawdown_tax::cmd_verify(cfg, std::cout);
    if (simulate->parsed()) return drawdown_tax::cmd_simulate(cfg, std::cout);
    if (reproduce->parsed()) return drawdown_tax::cmd_reproduce(cfg, std::cout);
  } catch (const drawdown_tax::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return ExitCode::kUsage;
  } catch (const drawdown_tax::AssumptionViolated& e) {
    std::cerr << "assumption violated: " << e.what() << '\n';
    return ExitCode::kAssumption;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ExitCode::kUsage;
  }
  return ExitCode::kUsage;
}
