#pragma once

#include <map>
#include <string>
#include <vector>

#include "dfrc/scenario.hpp"
#include "dfrc/types.hpp"

namespace dfrc {

/// Value in a config file: a number, boolean, string or (nested) array.
struct ConfigValue {
  enum class Kind { number, boolean, string, array } kind = Kind::number;
  Real number = 0;
  bool boolean = false;
  std::string text;
  std::vector<ConfigValue> array;
};

using ConfigSection = std::map<std::string, ConfigValue>;
using ConfigTree = std::map<std::string, ConfigSection>;

/// Parses the TOML subset used by the run configs: `[section]` headers,
/// `key = value` lines, `#` comments; values are numbers, booleans, quoted
/// strings and arrays (one nesting level for coordinate pairs).
ConfigTree parse_config_text(const std::string& text, const std::string& origin = "config");
ConfigTree parse_config_file(const std::string& path);

enum class PipelineObjective { minimize_d, minimize_v };

struct SolverConfig {
  Real tol = 1e-7;
  Real design_tol = 1e-10;
  int design_max_iter = 3000;
  Real beta0 = 1e-3;
  Real gamma = 3.0;
  Real beta_max = 1e3;
  Real epsilon = 1e-4;
  int max_outer = 30;
};

struct HeatmapSpec {
  int target = 0;
  Real span_m = 100.0;
  int steps = 21;
};

struct RunConfig {
  Scenario scenario;
  PipelineObjective objective = PipelineObjective::minimize_d;
  Real eta_d = 1.0;
  Real eta_v = 1.0;
  int n_active = 0;  // N_r; defaults to all receivers
  std::vector<Real> sweep;
  uint64_t seed = 1;
  std::string output_dir = ".";
  int oversample = 8;
  bool per_subcarrier_design = false;
  SolverConfig solver;
  HeatmapSpec heatmap;

  /// Loads, applies the seed-driven RCS draw when requested, validates.
  static RunConfig load(const std::string& path);
  static RunConfig from_tree(const ConfigTree& tree);
};

}  // namespace dfrc
