#pragma once

// Experiment configuration read from an INI-style key/value file.
//
//   [scenario]        mass
//   [grid]            ds, bins
//   [kernel]          eps, truncation, fragmentation (true | false)
//   [initial]         kind (monodisperse | exponential), size, rate
//   [solver]          dt, t_end, output_every
//   [outputs]         dir, x_min, x_max, x_points
//   [stochastic]      replicas, volume, times
//   [characteristics] starts, x0_min, x0_max, dt, record_every
//   [convergence]     eps_list, x_lo, x_hi, x_points
//   [experiment]      seed
//
// List values are whitespace or comma separated. Missing keys take the
// defaults below; unknown sections or keys are rejected so typos surface.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cflab/core.hpp"
#include "cflab/error.hpp"
#include "cflab/kinetic.hpp"

namespace cflab {

struct GridConfig {
  double ds = 0.05;
  std::size_t bins = 640;
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  double x_min = 1e-3;
  double x_max = 20.0;
  std::size_t x_points = 64;
};

struct StochasticConfig {
  std::size_t replicas = 200;
  double volume = 0.0;  // 0 selects about 1e4 initial particles
  std::vector<double> times;  // empty: solver snapshot times
};

struct CharacteristicsConfig {
  std::size_t starts = 2000;
  double x0_min = 0.0;  // 0 selects the automatic range
  double x0_max = 0.0;
  double dt = 1e-3;
  std::size_t record_every = 10;
};

struct ConvergenceConfig {
  std::vector<double> eps_list = {0.2, 0.1, 0.05};
  double x_lo = 0.5;
  double x_hi = 5.0;
  std::size_t x_points = 46;
};

struct ExperimentConfig {
  double mass = 1.0;
  GridConfig grid;
  KernelSpec kernel{0.1, 0};
  InitialProfile initial = Monodisperse{1.0, 1.0};
  kinetic::SolverConfig solver;
  OutputConfig outputs;
  StochasticConfig stochastic;
  CharacteristicsConfig characteristics;
  ConvergenceConfig convergence;
  std::uint64_t seed = 12345;

  SizeGrid size_grid() const { return SizeGrid(grid.ds, grid.bins); }
  Distribution initial_distribution() const { return make_initial(initial, size_grid()); }

  /// Solver config with the scenario filled in from the discretized initial data.
  kinetic::SolverConfig solver_config() const {
    auto c = solver;
    c.spec = kernel;
    c.scenario = ScenarioParams::from_initial(initial_distribution());
    return c;
  }
};

namespace detail {

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"scenario", {"mass"}},
      {"grid", {"ds", "bins"}},
      {"kernel", {"eps", "truncation", "fragmentation"}},
      {"initial", {"kind", "size", "rate"}},
      {"solver", {"dt", "t_end", "output_every"}},
      {"outputs", {"dir", "x_min", "x_max", "x_points"}},
      {"stochastic", {"replicas", "volume", "times"}},
      {"characteristics", {"starts", "x0_min", "x0_max", "dt", "record_every"}},
      {"convergence", {"eps_list", "x_lo", "x_hi", "x_points"}},
      {"experiment", {"seed"}},
  };
  return keys;
}

template <class T>
T get(const boost::property_tree::ptree& pt, const std::string& key, T fallback) {
  const auto node = pt.get_child_optional(boost::property_tree::ptree::path_type(key, '.'));
  if (!node) return fallback;
  const std::string raw = node->data();
  std::istringstream in(raw);
  T value{};
  in >> value;
  if (in.fail() || !(in >> std::ws).eof())
    throw ConfigError("config: bad value '" + raw + "' for " + key);
  return value;
}

inline std::vector<double> get_list(const boost::property_tree::ptree& pt, const std::string& key,
                                    std::vector<double> fallback) {
  const auto node = pt.get_child_optional(boost::property_tree::ptree::path_type(key, '.'));
  if (!node) return fallback;
  std::string raw = node->data();
  for (char& c : raw)
    if (c == ',') c = ' ';
  std::istringstream in(raw);
  std::vector<double> out;
  double v = 0.0;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw ConfigError("config: bad list '" + node->data() + "' for " + key);
  return out;
}

}  // namespace detail

/// Parses and validates a config. Any problem, including an unreadable file,
/// raises ConfigError.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = detail::known_keys().find(section);
    if (it == detail::known_keys().end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, unused] : body)
      if (!it->second.count(key)) throw ConfigError("config: unknown key " + section + "." + key);
  }

  using detail::get;
  ExperimentConfig c;
  c.mass = get(tree, "scenario.mass", c.mass);
  c.grid.ds = get(tree, "grid.ds", c.grid.ds);
  c.grid.bins = get(tree, "grid.bins", c.grid.bins);
  const double eps = get(tree, "kernel.eps", c.kernel.frag_eps);
  const std::size_t trunc = get(tree, "kernel.truncation", c.kernel.truncation);
  const std::string frag = get<std::string>(tree, "kernel.fragmentation", "true");
  if (frag != "true" && frag != "false")
    throw ConfigError("config: kernel.fragmentation must be true or false");

  const std::string kind = get<std::string>(tree, "initial.kind", "monodisperse");
  if (kind == "monodisperse") {
    c.initial = Monodisperse{c.mass, get(tree, "initial.size", 1.0)};
  } else if (kind == "exponential") {
    c.initial = Exponential{c.mass, get(tree, "initial.rate", 1.0)};
  } else {
    throw ConfigError("config: initial.kind must be monodisperse or exponential");
  }

  c.solver.dt = get(tree, "solver.dt", 2.5e-4);
  c.solver.t_end = get(tree, "solver.t_end", 0.3);
  c.solver.output_every = get(tree, "solver.output_every", std::size_t{20});

  c.outputs.dir = get<std::string>(tree, "outputs.dir", c.outputs.dir.string());
  c.outputs.x_min = get(tree, "outputs.x_min", c.outputs.x_min);
  c.outputs.x_max = get(tree, "outputs.x_max", c.outputs.x_max);
  c.outputs.x_points = get(tree, "outputs.x_points", c.outputs.x_points);

  c.stochastic.replicas = get(tree, "stochastic.replicas", c.stochastic.replicas);
  c.stochastic.volume = get(tree, "stochastic.volume", c.stochastic.volume);
  c.stochastic.times = detail::get_list(tree, "stochastic.times", {});

  auto& ch = c.characteristics;
  ch.starts = get(tree, "characteristics.starts", ch.starts);
  ch.x0_min = get(tree, "characteristics.x0_min", ch.x0_min);
  ch.x0_max = get(tree, "characteristics.x0_max", ch.x0_max);
  ch.dt = get(tree, "characteristics.dt", ch.dt);
  ch.record_every = get(tree, "characteristics.record_every", ch.record_every);

  auto& cv = c.convergence;
  cv.eps_list = detail::get_list(tree, "convergence.eps_list", cv.eps_list);
  cv.x_lo = get(tree, "convergence.x_lo", cv.x_lo);
  cv.x_hi = get(tree, "convergence.x_hi", cv.x_hi);
  cv.x_points = get(tree, "convergence.x_points", cv.x_points);

  c.seed = get(tree, "experiment.seed", c.seed);

  // Validation: delegate to the library constructors and translate.
  try {
    c.kernel = KernelSpec(eps, trunc, frag == "true");
    (void)c.size_grid();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!(c.mass > 0.0)) throw ConfigError("config: scenario.mass must be > 0");
  if (!(c.solver.dt > 0.0) || !(c.solver.t_end >= 0.0) || c.solver.output_every == 0)
    throw ConfigError("config: solver needs dt > 0, t_end >= 0, output_every >= 1");
  if (!(c.outputs.x_min > 0.0) || !(c.outputs.x_max > c.outputs.x_min) || c.outputs.x_points < 3)
    throw ConfigError("config: outputs needs 0 < x_min < x_max and x_points >= 3");
  if (c.stochastic.replicas < 2) throw ConfigError("config: stochastic.replicas must be >= 2");
  if (c.stochastic.volume < 0.0) throw ConfigError("config: stochastic.volume must be >= 0");
  if (ch.starts < 2 || !(ch.dt > 0.0) || ch.record_every == 0)
    throw ConfigError("config: characteristics needs starts >= 2, dt > 0, record_every >= 1");
  if (!(cv.x_lo > 0.0) || !(cv.x_hi > cv.x_lo) || cv.x_points < 2)
    throw ConfigError("config: convergence needs 0 < x_lo < x_hi and x_points >= 2");
  return c;
}

}  // namespace cflab
