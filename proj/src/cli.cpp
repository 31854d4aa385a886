#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "dfrc/pipeline.hpp"
#include "dfrc/waveform.hpp"

namespace dfrc {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumerical = 4;

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  int64_t seed = -1;
  Real tol = -1;
  bool quiet = false;
  bool dump_demod = false;
  bool per_k = false;
};

RunConfig load(const CliOptions& opt) {
  RunConfig cfg = RunConfig::load(opt.config_path);
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  if (opt.seed >= 0) cfg.seed = static_cast<uint64_t>(opt.seed);
  if (opt.tol > 0) cfg.solver.tol = opt.tol;
  std::filesystem::create_directories(cfg.output_dir);
  return cfg;
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void say(const CliOptions& opt, const std::string& msg) {
  if (!opt.quiet) std::cout << msg << '\n';
}

/// Baseline allocation for diagnostics: all power to detection, spread
/// uniformly over subcarriers with subareas assigned round-robin.
MatX uniform_detection_weight(const Scenario& sc) {
  MatX w = MatX::Zero(sc.num_subcarriers, sc.num_targets());
  const Real p = sc.total_power_w / static_cast<Real>(sc.num_subcarriers);
  for (int k = 0; k < sc.num_subcarriers; ++k) w(k, k % sc.num_targets()) = p;
  return w;
}

std::vector<int> all_receivers(const Scenario& sc) {
  return std::vector<int>(sc.num_receivers(), 1);
}

int cmd_beampattern(const CliOptions& opt) {
  const RunConfig cfg = load(opt);
  PipelineModel model = build_model(cfg);
  const int k_hi = opt.per_k ? cfg.scenario.num_subcarriers : 1;
  for (int k = 0; k < k_hi; ++k)
    for (int n = 0; n < model.cov.num_subareas; ++n)
      write_pattern_csv(join(cfg.output_dir, "pattern_k" + std::to_string(k) + "_n" +
                                                 std::to_string(n) + ".csv"),
                        cfg.scenario, model.cov, k, n);
  say(opt, "beampattern: wrote " + std::to_string(k_hi * model.cov.num_subareas) +
               " pattern files to " + cfg.output_dir);
  return kExitOk;
}

int cmd_verify_ici(const CliOptions& opt) {
  const RunConfig cfg = load(opt);
  const Scenario& sc = cfg.scenario;
  PipelineModel model = build_model(cfg);
  std::mt19937_64 rng(cfg.seed);

  // All subcarriers on detection duty for the ICI check.
  std::vector<SubcarrierOwner> owner(sc.num_subcarriers);
  for (int k = 0; k < sc.num_subcarriers; ++k) owner[k] = {false, k % sc.num_targets()};
  const VecX power =
      VecX::Constant(sc.num_subcarriers, sc.total_power_w / sc.num_subcarriers);
  const SymbolGrid grid = make_symbol_grid(sc, owner, power, rng);

  std::vector<MatX> residuals;
  std::vector<CMat> demods;
  Real worst = 0;
  for (int r = 0; r < sc.num_receivers(); ++r) {
    const IciReport rep = ici_residual(sc, grid, model.cov, r, cfg.oversample);
    worst = std::max(worst, rep.max_rel);
    residuals.push_back(rep.residual);
    if (opt.dump_demod) {
      const EchoGrid echo = simulate_echo(sc, grid, model.cov, r, true, cfg.oversample);
      demods.push_back(demodulate_all(echo, sc.num_subcarriers, sc.subcarrier_spacing_hz));
    }
  }
  write_ici_csv(join(cfg.output_dir, "ici_residual.csv"), residuals);
  if (opt.dump_demod) write_demod_csv(join(cfg.output_dir, "demod.csv"), demods);
  say(opt, "verify-ici: max relative residual " + std::to_string(worst));
  return kExitOk;
}

int cmd_crb(const CliOptions& opt) {
  const RunConfig cfg = load(opt);
  PipelineModel model = build_model(cfg);
  const auto crb = crb_matrices(model.blocks, uniform_detection_weight(cfg.scenario),
                                all_receivers(cfg.scenario));
  write_crb_csv(join(cfg.output_dir, "crb.csv"), crb);
  say(opt, "crb: wrote per-target bounds for the uniform all-detection baseline");
  return kExitOk;
}

int cmd_allocate(const CliOptions& opt) {
  const RunConfig cfg = load(opt);
  PipelineModel model = build_model(cfg);
  std::vector<int> mask(cfg.scenario.num_receivers(), 0);
  for (int r = 0; r < cfg.n_active; ++r) mask[r] = 1;
  AllocationContext ctx =
      make_allocation_context(cfg.scenario, model.blocks, mask, cfg.eta_d, cfg.eta_v);
  conic::Settings settings;
  settings.tol = cfg.solver.tol;
  PenaltySchedule schedule;
  schedule.beta0 = cfg.solver.beta0;
  schedule.gamma = cfg.solver.gamma;
  schedule.beta_max = cfg.solver.beta_max;
  schedule.epsilon = cfg.solver.epsilon;
  schedule.max_outer = cfg.solver.max_outer;
  const Allocation alloc = algorithm1(ctx, schedule, settings);
  const std::vector<TradeoffPoint> pts = {evaluate_point(cfg, model, alloc, mask)};
  write_tradeoff_csv(join(cfg.output_dir, "allocation.csv"), pts);
  say(opt, "allocate: rate " + std::to_string(pts[0].rate_bits_per_s) + " bits/s, wrote " +
               join(cfg.output_dir, "allocation.csv"));
  return kExitOk;
}

int cmd_select(const CliOptions& opt) {
  const RunConfig cfg = load(opt);
  PipelineModel model = build_model(cfg);
  std::vector<int> mask = all_receivers(cfg.scenario);
  AllocationContext ctx =
      make_allocation_context(cfg.scenario, model.blocks, mask, cfg.eta_d, cfg.eta_v);
  conic::Settings settings;
  settings.tol = cfg.solver.tol;
  const Allocation alloc = algorithm1(ctx, {}, settings);

  const bool minimize_d = cfg.objective == PipelineObjective::minimize_d;
  SelectionInstance inst = SelectionInstance::build(
      model.blocks, alloc.pbar_r, cfg.n_active, minimize_d ? cfg.eta_v : cfg.eta_d);
  const SelectionObjective obj =
      minimize_d ? SelectionObjective::minimize_d : SelectionObjective::minimize_v;
  const auto bracket = initial_bracket(inst, obj);
  const BisectionResult sel =
      minimize_d ? algorithm2(inst, bracket.first, bracket.second, 1e-4 * bracket.second)
                 : select_velocity_variant(inst, bracket.first, bracket.second,
                                           1e-4 * bracket.second);
  write_selection_csv(join(cfg.output_dir, "selection.csv"), cfg.n_active,
                      cfg.scenario.num_receivers(), sel.eta, sel.mask.s);
  say(opt, "select: eta* " + std::to_string(sel.eta) + " mask " + mask_bits(sel.mask.s));
  return kExitOk;
}

int cmd_alternate(const CliOptions& opt) {
  const RunConfig cfg = load(opt);
  PipelineModel model = build_model(cfg);
  const AlternateResult res = alternate(cfg, model);
  write_tradeoff_csv(join(cfg.output_dir, "alternate.csv"), {res.point});
  say(opt, "alternate: rate " + std::to_string(res.point.rate_bits_per_s) + " bits/s, mask " +
               mask_bits(res.mask) + " after " + std::to_string(res.outer_iterations) +
               " outer rounds");
  return kExitOk;
}

int cmd_tradeoff(const CliOptions& opt) {
  const RunConfig cfg = load(opt);
  if (cfg.sweep.empty()) throw ConfigError("experiment.sweep is required for tradeoff runs");
  PipelineModel model = build_model(cfg);
  const auto points = tradeoff_sweep(cfg, model);
  write_tradeoff_csv(join(cfg.output_dir, "tradeoff.csv"), points);
  int feasible = 0;
  for (const auto& p : points) feasible += p.feasible ? 1 : 0;
  say(opt, "tradeoff: " + std::to_string(feasible) + "/" + std::to_string(points.size()) +
               " sweep points feasible, wrote " + join(cfg.output_dir, "tradeoff.csv"));
  return kExitOk;
}

int cmd_heatmap(const CliOptions& opt) {
  const RunConfig cfg = load(opt);
  PipelineModel model = build_model(cfg);
  const AlternateResult res = alternate(cfg, model);
  const auto cells = crb_heatmap(cfg, model, res.allocation.pbar_r, res.mask);
  write_heatmap_csv(join(cfg.output_dir, "heatmap.csv"), cells);
  say(opt, "heatmap: wrote " + std::to_string(cells.size()) + " cells to " +
               join(cfg.output_dir, "heatmap.csv"));
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Distributed MIMO-OFDM dual-function radar-communication toolkit"};
  app.require_subcommand(1);

  CliOptions opt;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Run configuration file")->required();
    sub->add_option("--out", opt.out_dir, "Output directory (overrides the config)");
    sub->add_option("--seed", opt.seed, "RNG seed override");
    sub->add_option("--tol", opt.tol, "Solver tolerance override");
    sub->add_flag("--quiet", opt.quiet, "Suppress progress output");
    return sub;
  };

  auto* beam = add_common(app.add_subcommand("beampattern", "Export designed beampatterns"));
  beam->add_flag("--per-k", opt.per_k, "Emit one pattern file per subcarrier");
  auto* ici = add_common(app.add_subcommand("verify-ici", "Check the CP-extension ICI residual"));
  ici->add_flag("--dump-demod", opt.dump_demod, "Also dump the demodulated grid");
  add_common(app.add_subcommand("crb", "Per-target CRB for the all-detection baseline"));
  add_common(app.add_subcommand("allocate", "Subcarrier/power allocation (Algorithm 1)"));
  add_common(app.add_subcommand("select", "Receiver selection (Algorithm 2)"));
  add_common(app.add_subcommand("alternate", "Alternating allocation and selection"));
  add_common(app.add_subcommand("tradeoff", "Rate/CRB tradeoff sweep"));
  add_common(app.add_subcommand("heatmap", "Spatial CRB map around a target"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (app.got_subcommand("beampattern")) return cmd_beampattern(opt);
    if (app.got_subcommand("verify-ici")) return cmd_verify_ici(opt);
    if (app.got_subcommand("crb")) return cmd_crb(opt);
    if (app.got_subcommand("allocate")) return cmd_allocate(opt);
    if (app.got_subcommand("select")) return cmd_select(opt);
    if (app.got_subcommand("alternate")) return cmd_alternate(opt);
    if (app.got_subcommand("tradeoff")) return cmd_tradeoff(opt);
    if (app.got_subcommand("heatmap")) return cmd_heatmap(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const DegenerateGeometryError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace dfrc
