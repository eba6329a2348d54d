#pragma once

// Run configuration: a JSON document with sections model, q, xi, control,
// grid, simulation and output. Every violated constraint is collected
// before a ConfigError is thrown, so no run starts half-validated.

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "drawdown_tax/drawdown.hpp"
#include "drawdown_tax/errors.hpp"
#include "drawdown_tax/levy_models.hpp"
#include "drawdown_tax/mc_sim.hpp"
#include "drawdown_tax/taxed_exit.hpp"

namespace drawdown_tax {

inline constexpr const char* kVersion = "0.1.0";

struct GridSpec {
  double x_min = 0.05;
  double x_max = 20.0;
  int points = 200;

  std::vector<double> values() const {
    std::vector<double> xs;
    xs.reserve(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
      xs.push_back(points == 1 ? x_min : x_min + (x_max - x_min) * i / (points - 1));
    return xs;
  }
};

struct RunConfig {
  LevyModel model = BrownianDrift{0.03, 0.4};
  double q = 0.01;
  DrawdownFn xi = LinearDrawdown{0.1, 1.0};
  double gamma1 = 0.2;
  double gamma2 = 0.6;
  std::optional<TaxStrategy> strategy;  // function of the untaxed running maximum
  GridSpec grid;
  SimConfig sim;
  double x = 1.0;  // starting level for simulate and verify
  std::string quantity = "tax";
  bool use_optimal = false;
  std::string output_dir = ".";
};

/// The configuration used when no file is given.
inline nlohmann::json default_config_json() {
  return {
      {"model", {{"family", "brownian"}, {"mu", 0.03}, {"sigma", 0.4}}},
      {"q", 0.01},
      {"xi", {{"kind", "linear"}, {"k", 0.1}, {"d", 1.0}}},
      {"control", {{"gamma1", 0.2}, {"gamma2", 0.6}}},
      {"grid", {{"x_min", 0.05}, {"x_max", 20.0}, {"points", 200}}},
      {"simulation",
       {{"paths", 100000}, {"dt", 1e-4}, {"max_step", 1.0}, {"horizon", 0.0}, {"seed", 12345}, {"x", 1.0},
        {"quantity", "tax"}, {"optimal", false}}},
      {"output", {{"dir", "."}}},
  };
}

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(std::vector<std::string>& errors) : errors_(&errors) {}

  void allow(const nlohmann::json& obj, const std::string& where, std::set<std::string> keys) {
    if (!obj.is_object()) {
      errors_->push_back(where + " must be an object");
      return;
    }
    for (const auto& [k, v] : obj.items())
      if (!keys.count(k)) errors_->push_back("unknown key " + (where.empty() ? k : where + "." + k));
  }

  double number(const nlohmann::json& obj, const std::string& where, const std::string& key, double fallback,
                bool required = false) {
    if (!obj.is_object() || !obj.contains(key)) {
      if (required) errors_->push_back(where + "." + key + " is required");
      return fallback;
    }
    const auto& v = obj.at(key);
    if (!v.is_number()) {
      errors_->push_back(where + "." + key + " must be a number");
      return fallback;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) errors_->push_back(where + "." + key + " must be finite");
    return d;
  }

  std::string text(const nlohmann::json& obj, const std::string& where, const std::string& key,
                   const std::string& fallback, bool required = false) {
    if (!obj.is_object() || !obj.contains(key)) {
      if (required) errors_->push_back(where + "." + key + " is required");
      return fallback;
    }
    const auto& v = obj.at(key);
    if (!v.is_string()) {
      errors_->push_back(where + "." + key + " must be a string");
      return fallback;
    }
    return v.get<std::string>();
  }

  bool flag(const nlohmann::json& obj, const std::string& where, const std::string& key, bool fallback) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_boolean()) {
      errors_->push_back(where + "." + key + " must be true or false");
      return fallback;
    }
    return v.get<bool>();
  }

  std::vector<double> numbers(const nlohmann::json& obj, const std::string& where, const std::string& key) {
    std::vector<double> out;
    if (!obj.contains(key)) {
      errors_->push_back(where + "." + key + " is required");
      return out;
    }
    const auto& v = obj.at(key);
    if (!v.is_array()) {
      errors_->push_back(where + "." + key + " must be an array of numbers");
      return out;
    }
    for (const auto& e : v) {
      if (!e.is_number()) {
        errors_->push_back(where + "." + key + " must be an array of numbers");
        return {};
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  void add(std::vector<std::string> more) {
    for (auto& m : more) errors_->push_back(std::move(m));
  }
  void add(std::string m) { errors_->push_back(std::move(m)); }

 private:
  std::vector<std::string>* errors_;
};

inline nlohmann::json section(const nlohmann::json& j, const std::string& key) {
  return j.contains(key) ? j.at(key) : nlohmann::json::object();
}

}  // namespace detail

/// Validates and converts a JSON configuration. Missing sections take the
/// defaults of default_config_json().
inline RunConfig parse_config(const nlohmann::json& j) {
  std::vector<std::string> errors;
  detail::ConfigReader rd(errors);
  RunConfig cfg;
  if (!j.is_object()) throw ConfigError({"configuration must be a JSON object"});
  rd.allow(j, "", {"model", "q", "xi", "control", "grid", "simulation", "output"});

  // model
  const auto model = detail::section(j, "model");
  const std::string family = rd.text(model, "model", "family", "brownian");
  if (family == "brownian") {
    rd.allow(model, "model", {"family", "mu", "sigma"});
    cfg.model = BrownianDrift{rd.number(model, "model", "mu", 0.03), rd.number(model, "model", "sigma", 0.4)};
  } else if (family == "cramer_lundberg") {
    rd.allow(model, "model", {"family", "premium", "intensity", "claim_rate"});
    cfg.model = CramerLundberg{rd.number(model, "model", "premium", 0.0, true),
                               rd.number(model, "model", "intensity", 0.0, true),
                               rd.number(model, "model", "claim_rate", 0.0, true)};
  } else {
    rd.add("model.family must be \"brownian\" or \"cramer_lundberg\"");
  }
  rd.add(model_violations(cfg.model));

  // q
  if (j.contains("q")) {
    if (!j.at("q").is_number()) rd.add("q must be a number");
    else cfg.q = j.at("q").get<double>();
  }
  if (!(cfg.q > 0.0) || !std::isfinite(cfg.q)) rd.add("q must be > 0");

  // xi
  const auto xi_json = detail::section(j, "xi");
  const std::string kind = rd.text(xi_json, "xi", "kind", "linear");
  if (kind == "linear") {
    rd.allow(xi_json, "xi", {"kind", "k", "d"});
    cfg.xi = LinearDrawdown{rd.number(xi_json, "xi", "k", 0.1), rd.number(xi_json, "xi", "d", 1.0)};
    rd.add(drawdown_violations(cfg.xi));
  } else if (kind == "tabulated") {
    rd.allow(xi_json, "xi", {"kind", "path"});
    const std::string path = rd.text(xi_json, "xi", "path", "", true);
    if (!path.empty()) {
      try {
        cfg.xi = TabulatedDrawdown::from_csv(path);
      } catch (const std::exception& e) {
        rd.add(std::string("xi.path: ") + e.what());
      }
    }
  } else {
    rd.add("xi.kind must be \"linear\" or \"tabulated\"");
  }

  // control
  const auto control = detail::section(j, "control");
  rd.allow(control, "control", {"gamma1", "gamma2", "strategy"});
  cfg.gamma1 = rd.number(control, "control", "gamma1", 0.2);
  cfg.gamma2 = rd.number(control, "control", "gamma2", 0.6);
  const auto control_errors = control_violations(cfg.gamma1, cfg.gamma2);
  rd.add(control_errors);
  if (control.is_object() && control.contains("strategy")) {
    const auto& st = control.at("strategy");
    rd.allow(st, "control.strategy", {"breakpoints", "values"});
    auto bp = rd.numbers(st, "control.strategy", "breakpoints");
    auto vals = rd.numbers(st, "control.strategy", "values");
    if (control_errors.empty()) {
      try {
        cfg.strategy = TaxStrategy(cfg.gamma1, cfg.gamma2, bp, vals);
      } catch (const std::exception& e) {
        rd.add(std::string("control.strategy: ") + e.what());
      }
    }
  }

  // grid
  const auto grid = detail::section(j, "grid");
  rd.allow(grid, "grid", {"x_min", "x_max", "points"});
  cfg.grid.x_min = rd.number(grid, "grid", "x_min", cfg.grid.x_min);
  cfg.grid.x_max = rd.number(grid, "grid", "x_max", cfg.grid.x_max);
  cfg.grid.points = static_cast<int>(rd.number(grid, "grid", "points", cfg.grid.points));
  if (!(cfg.grid.x_min >= 0.0)) rd.add("grid.x_min must be >= 0");
  if (!(cfg.grid.x_max > cfg.grid.x_min)) rd.add("grid.x_max must be > grid.x_min");
  if (cfg.grid.points < 2) rd.add("grid.points must be >= 2");

  // simulation
  const auto sim = detail::section(j, "simulation");
  rd.allow(sim, "simulation",
           {"paths", "dt", "max_step", "horizon", "seed", "barrier", "x", "quantity", "optimal", "threads"});
  const double paths = rd.number(sim, "simulation", "paths", 100000);
  if (!(paths >= 1.0) || paths != std::floor(paths)) rd.add("simulation.paths must be a positive integer");
  else cfg.sim.n_paths = static_cast<std::size_t>(paths);
  cfg.sim.dt = rd.number(sim, "simulation", "dt", cfg.sim.dt);
  cfg.sim.max_step = rd.number(sim, "simulation", "max_step", cfg.sim.max_step);
  cfg.sim.horizon = rd.number(sim, "simulation", "horizon", 0.0);
  if (sim.is_object() && sim.contains("seed")) {
    const auto& seed = sim.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<long long>() < 0))
      rd.add("simulation.seed must be a non-negative integer");
    else cfg.sim.seed = sim.at("seed").get<std::uint64_t>();
  }
  if (sim.is_object() && sim.contains("barrier") && !sim.at("barrier").is_null())
    cfg.sim.barrier = rd.number(sim, "simulation", "barrier", 0.0);
  const double threads = rd.number(sim, "simulation", "threads", 0);
  if (!(threads >= 0.0)) rd.add("simulation.threads must be >= 0");
  else cfg.sim.threads = static_cast<unsigned>(threads);
  cfg.x = rd.number(sim, "simulation", "x", cfg.x);
  if (!(cfg.x >= 0.0)) rd.add("simulation.x must be >= 0");
  if (cfg.sim.barrier && !(*cfg.sim.barrier >= cfg.x)) rd.add("simulation.barrier must be >= simulation.x");
  cfg.quantity = rd.text(sim, "simulation", "quantity", cfg.quantity);
  if (cfg.quantity != "tax" && cfg.quantity != "exit") rd.add("simulation.quantity must be \"tax\" or \"exit\"");
  if (cfg.quantity == "exit" && !cfg.sim.barrier) rd.add("simulation.barrier is required for quantity \"exit\"");
  cfg.use_optimal = rd.flag(sim, "simulation", "optimal", false);
  rd.add(sim_violations(cfg.sim));

  // output
  const auto output = detail::section(j, "output");
  rd.allow(output, "output", {"dir"});
  cfg.output_dir = rd.text(output, "output", "dir", ".");

  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

inline nlohmann::json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path});
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({"config file " + path + ": " + e.what()});
  }
}

}  // namespace drawdown_tax
