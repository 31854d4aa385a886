#include "dfrc/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

namespace dfrc {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

ConfigValue parse_value(const std::string& raw, const std::string& where);

ConfigValue parse_array(const std::string& raw, const std::string& where) {
  if (raw.size() < 2 || raw.back() != ']') throw ConfigError(where + ": unterminated array");
  ConfigValue v;
  v.kind = ConfigValue::Kind::array;
  int depth = 0;
  std::string item;
  for (size_t i = 1; i + 1 < raw.size(); ++i) {
    const char c = raw[i];
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      const std::string t = trim(item);
      if (t.empty()) throw ConfigError(where + ": empty array element");
      v.array.push_back(parse_value(t, where));
      item.clear();
    } else {
      item += c;
    }
  }
  if (depth != 0) throw ConfigError(where + ": unbalanced brackets");
  const std::string tail = trim(item);
  if (!tail.empty()) v.array.push_back(parse_value(tail, where));
  return v;
}

ConfigValue parse_value(const std::string& raw, const std::string& where) {
  ConfigValue v;
  if (raw.empty()) throw ConfigError(where + ": empty value");
  if (raw.front() == '[') return parse_array(raw, where);
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"')
      throw ConfigError(where + ": unterminated string");
    v.kind = ConfigValue::Kind::string;
    v.text = raw.substr(1, raw.size() - 2);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = ConfigValue::Kind::boolean;
    v.boolean = raw == "true";
    return v;
  }
  char* end = nullptr;
  v.number = std::strtod(raw.c_str(), &end);
  if (end == raw.c_str() || *end != '\0')
    throw ConfigError(where + ": cannot parse value '" + raw + "'");
  v.kind = ConfigValue::Kind::number;
  return v;
}

}  // namespace

ConfigTree parse_config_text(const std::string& text, const std::string& origin) {
  ConfigTree tree;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    // Strip comments outside strings.
    bool in_string = false;
    std::string clean;
    for (char c : line) {
      if (c == '"') in_string = !in_string;
      if (c == '#' && !in_string) break;
      clean += c;
    }
    clean = trim(clean);
    if (clean.empty()) continue;
    if (clean.front() == '[' && clean.back() == ']' &&
        clean.find('=') == std::string::npos) {
      section = trim(clean.substr(1, clean.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      tree[section];
      continue;
    }
    const auto eq = clean.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(clean.substr(0, eq));
    const std::string val = trim(clean.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    tree[section][key] = parse_value(val, where + " (" + key + ")");
  }
  return tree;
}

ConfigTree parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

namespace {

const ConfigValue* find(const ConfigTree& tree, const std::string& section,
                        const std::string& key) {
  const auto s = tree.find(section);
  if (s == tree.end()) return nullptr;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return nullptr;
  return &k->second;
}

Real get_number(const ConfigTree& t, const std::string& s, const std::string& k, Real dflt) {
  const ConfigValue* v = find(t, s, k);
  if (!v) return dflt;
  if (v->kind != ConfigValue::Kind::number)
    throw ConfigError("config field " + s + "." + k + " must be a number");
  return v->number;
}

int get_int(const ConfigTree& t, const std::string& s, const std::string& k, int dflt) {
  const Real v = get_number(t, s, k, static_cast<Real>(dflt));
  if (std::abs(v - std::round(v)) > 1e-9)
    throw ConfigError("config field " + s + "." + k + " must be an integer");
  return static_cast<int>(std::llround(v));
}

std::string get_string(const ConfigTree& t, const std::string& s, const std::string& k,
                       const std::string& dflt) {
  const ConfigValue* v = find(t, s, k);
  if (!v) return dflt;
  if (v->kind != ConfigValue::Kind::string)
    throw ConfigError("config field " + s + "." + k + " must be a string");
  return v->text;
}

bool get_bool(const ConfigTree& t, const std::string& s, const std::string& k, bool dflt) {
  const ConfigValue* v = find(t, s, k);
  if (!v) return dflt;
  if (v->kind != ConfigValue::Kind::boolean)
    throw ConfigError("config field " + s + "." + k + " must be a boolean");
  return v->boolean;
}

std::vector<Real> number_list(const ConfigValue& v, const std::string& what) {
  if (v.kind != ConfigValue::Kind::array)
    throw ConfigError("config field " + what + " must be an array");
  std::vector<Real> out;
  for (const auto& e : v.array) {
    if (e.kind != ConfigValue::Kind::number)
      throw ConfigError("config field " + what + " must hold numbers");
    out.push_back(e.number);
  }
  return out;
}

Vec2 pair_value(const ConfigValue& v, const std::string& what) {
  const auto nums = number_list(v, what);
  if (nums.size() != 2) throw ConfigError("config field " + what + " must be [x, y]");
  return Vec2(nums[0], nums[1]);
}

std::vector<Vec2> pair_list(const ConfigTree& t, const std::string& s, const std::string& k) {
  const ConfigValue* v = find(t, s, k);
  std::vector<Vec2> out;
  if (!v) return out;
  if (v->kind != ConfigValue::Kind::array)
    throw ConfigError("config field " + s + "." + k + " must be an array of [x, y] pairs");
  for (size_t i = 0; i < v->array.size(); ++i)
    out.push_back(pair_value(v->array[i], s + "." + k + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace

RunConfig RunConfig::from_tree(const ConfigTree& tree) {
  RunConfig cfg;
  Scenario& sc = cfg.scenario;

  if (const ConfigValue* v = find(tree, "scenario", "bs_position"))
    sc.bs_position = pair_value(*v, "scenario.bs_position");
  sc.receiver_positions = pair_list(tree, "scenario", "receivers");
  sc.target_positions = pair_list(tree, "scenario", "targets");
  sc.target_velocities = pair_list(tree, "scenario", "velocities");
  sc.user_positions = pair_list(tree, "scenario", "users");

  sc.carrier_hz = get_number(tree, "scenario", "carrier_hz", sc.carrier_hz);
  sc.subcarrier_spacing_hz =
      get_number(tree, "scenario", "subcarrier_spacing_hz", sc.subcarrier_spacing_hz);
  sc.num_subcarriers = get_int(tree, "scenario", "num_subcarriers", sc.num_subcarriers);
  sc.num_tx_antennas = get_int(tree, "scenario", "num_tx_antennas", sc.num_tx_antennas);
  sc.num_symbols = get_int(tree, "scenario", "num_symbols", sc.num_symbols);
  sc.cp_duration_s = get_number(tree, "scenario", "cp_duration_s", sc.cp_duration_s);
  sc.total_power_w = get_number(tree, "scenario", "total_power_w", sc.total_power_w);
  sc.radar_noise_var = get_number(tree, "scenario", "radar_noise_var", sc.radar_noise_var);
  sc.comm_noise_var = get_number(tree, "scenario", "comm_noise_var", sc.comm_noise_var);

  // Optional cross-check: a stated symbol period must match 1/df.
  if (const ConfigValue* v = find(tree, "scenario", "symbol_period_s")) {
    if (v->kind != ConfigValue::Kind::number)
      throw ConfigError("config field scenario.symbol_period_s must be a number");
    if (std::abs(v->number - 1.0 / sc.subcarrier_spacing_hz) >
        1e-9 / sc.subcarrier_spacing_hz)
      throw ConfigError("scenario.symbol_period_s must equal 1/subcarrier_spacing_hz");
  }

  if (const ConfigValue* v = find(tree, "scenario", "subareas")) {
    if (v->kind != ConfigValue::Kind::array)
      throw ConfigError("config field scenario.subareas must be an array of [lo, hi]");
    for (size_t i = 0; i < v->array.size(); ++i) {
      const Vec2 iv = pair_value(v->array[i], "scenario.subareas[" + std::to_string(i) + "]");
      sc.detection_subareas.push_back({iv(0), iv(1)});
    }
  }

  cfg.seed = static_cast<uint64_t>(get_number(tree, "experiment", "seed", 1));
  if (const char* env = std::getenv("DFRC_SEED")) {
    if (!find(tree, "experiment", "seed")) cfg.seed = std::strtoull(env, nullptr, 10);
  }

  if (const ConfigValue* v = find(tree, "scenario", "rcs")) {
    sc.rcs_per_receiver = number_list(*v, "scenario.rcs");
  } else if (const ConfigValue* v2 = find(tree, "scenario", "rcs_range")) {
    const auto range = number_list(*v2, "scenario.rcs_range");
    if (range.size() != 2 || range[0] <= 0 || range[1] < range[0])
      throw ConfigError("scenario.rcs_range must be [lo, hi] with 0 < lo <= hi");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<Real> u(range[0], range[1]);
    sc.rcs_per_receiver.resize(sc.receiver_positions.size());
    for (auto& r : sc.rcs_per_receiver) r = u(rng);
  }

  const std::string obj = get_string(tree, "experiment", "objective", "minimize_d");
  if (obj == "minimize_d")
    cfg.objective = PipelineObjective::minimize_d;
  else if (obj == "minimize_v")
    cfg.objective = PipelineObjective::minimize_v;
  else
    throw ConfigError("experiment.objective must be minimize_d or minimize_v");

  cfg.eta_d = get_number(tree, "experiment", "eta_d", cfg.eta_d);
  cfg.eta_v = get_number(tree, "experiment", "eta_v", cfg.eta_v);
  cfg.n_active = get_int(tree, "experiment", "n_active", sc.num_receivers());
  if (const ConfigValue* v = find(tree, "experiment", "sweep"))
    cfg.sweep = number_list(*v, "experiment.sweep");
  cfg.output_dir = get_string(tree, "experiment", "output_dir", cfg.output_dir);
  cfg.oversample = get_int(tree, "experiment", "oversample", cfg.oversample);
  cfg.per_subcarrier_design =
      get_bool(tree, "experiment", "per_subcarrier_design", cfg.per_subcarrier_design);

  cfg.heatmap.target = get_int(tree, "experiment", "heatmap_target", cfg.heatmap.target);
  cfg.heatmap.span_m = get_number(tree, "experiment", "heatmap_span_m", cfg.heatmap.span_m);
  cfg.heatmap.steps = get_int(tree, "experiment", "heatmap_steps", cfg.heatmap.steps);

  cfg.solver.tol = get_number(tree, "solver", "tol", cfg.solver.tol);
  cfg.solver.design_tol = get_number(tree, "solver", "design_tol", cfg.solver.design_tol);
  cfg.solver.design_max_iter =
      get_int(tree, "solver", "design_max_iter", cfg.solver.design_max_iter);
  cfg.solver.beta0 = get_number(tree, "solver", "beta0", cfg.solver.beta0);
  cfg.solver.gamma = get_number(tree, "solver", "gamma", cfg.solver.gamma);
  cfg.solver.beta_max = get_number(tree, "solver", "beta_max", cfg.solver.beta_max);
  cfg.solver.epsilon = get_number(tree, "solver", "epsilon", cfg.solver.epsilon);
  cfg.solver.max_outer = get_int(tree, "solver", "max_outer", cfg.solver.max_outer);

  sc.validate();
  if (cfg.eta_d <= 0 || cfg.eta_v <= 0)
    throw ConfigError("experiment.eta_d and experiment.eta_v must be positive");
  if (cfg.n_active < 1 || cfg.n_active > sc.num_receivers())
    throw ConfigError("experiment.n_active must be between 1 and the receiver count (" +
                      std::to_string(sc.num_receivers()) + ")");
  for (size_t i = 0; i < cfg.sweep.size(); ++i) {
    if (cfg.sweep[i] <= 0) throw ConfigError("experiment.sweep values must be positive");
    if (i > 0 && cfg.sweep[i] <= cfg.sweep[i - 1])
      throw ConfigError("experiment.sweep must be strictly increasing");
  }
  if (cfg.oversample < 1) throw ConfigError("experiment.oversample must be >= 1");
  if (cfg.heatmap.steps < 2 || cfg.heatmap.span_m <= 0 || cfg.heatmap.target < 0 ||
      cfg.heatmap.target >= sc.num_targets())
    throw ConfigError("experiment.heatmap_* fields are inconsistent");
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_tree(parse_config_file(path));
}

}  // namespace dfrc
