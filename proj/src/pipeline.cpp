#include "dfrc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dfrc/waveform.hpp"

namespace dfrc {

namespace {

std::vector<int> first_mask(int num_receivers, int n_active) {
  std::vector<int> mask(num_receivers, 0);
  for (int r = 0; r < n_active; ++r) mask[r] = 1;
  return mask;
}

conic::Settings solver_settings(const RunConfig& cfg) {
  conic::Settings s;
  s.tol = cfg.solver.tol;
  return s;
}

PenaltySchedule penalty_schedule(const RunConfig& cfg) {
  PenaltySchedule ps;
  ps.beta0 = cfg.solver.beta0;
  ps.gamma = cfg.solver.gamma;
  ps.beta_max = cfg.solver.beta_max;
  ps.epsilon = cfg.solver.epsilon;
  ps.max_outer = cfg.solver.max_outer;
  return ps;
}

}  // namespace

TradeoffPoint evaluate_point(const RunConfig& cfg, const PipelineModel& model,
                             const Allocation& alloc, const std::vector<int>& mask) {
  TradeoffPoint pt;
  pt.eta_d_in = cfg.eta_d;
  pt.eta_v_in = cfg.eta_v;
  pt.feasible = true;
  pt.mask = mask;
  pt.allocation = alloc;
  pt.rate_bits_per_s = alloc.rate / cfg.scenario.symbol_period_s();

  const auto crb = crb_matrices(model.blocks, alloc.pbar_r, mask);
  pt.crb_x = pt.crb_y = pt.crb_vx = pt.crb_vy = 0;
  for (const auto& c : crb) {
    pt.crb_x = std::max(pt.crb_x, c.location(0, 0));
    pt.crb_y = std::max(pt.crb_y, c.location(1, 1));
    pt.crb_vx = std::max(pt.crb_vx, c.velocity(0, 0));
    pt.crb_vy = std::max(pt.crb_vy, c.velocity(1, 1));
  }
  for (int k = 0; k < cfg.scenario.num_subcarriers; ++k) {
    if (alloc.sigma_c.row(k).sum() > 0.5)
      ++pt.subcarriers_comm;
    else
      ++pt.subcarriers_radar;
  }
  const Real pc = alloc.pbar_c.sum();
  const Real pr = alloc.pbar_r.sum();
  pt.power_comm_frac = pc / cfg.scenario.total_power_w;
  pt.power_radar_frac = pr / cfg.scenario.total_power_w;
  return pt;
}

PipelineModel build_model(const RunConfig& cfg) {
  PipelineModel model;
  DesignOptions opts;
  opts.tol = cfg.solver.design_tol;
  opts.max_iter = cfg.solver.design_max_iter;
  model.cov = design_covariance_set(cfg.scenario, cfg.per_subcarrier_design, opts);
  model.blocks = info_blocks(cfg.scenario, model.cov);
  return model;
}

AlternateResult alternate(const RunConfig& cfg, const PipelineModel& model) {
  const int rx = cfg.scenario.num_receivers();
  const conic::Settings settings = solver_settings(cfg);
  const PenaltySchedule schedule = penalty_schedule(cfg);

  AlternateResult res;
  res.mask = first_mask(rx, cfg.n_active);

  AllocationContext ctx =
      make_allocation_context(cfg.scenario, model.blocks, res.mask, cfg.eta_d, cfg.eta_v);
  res.allocation = algorithm1(ctx, schedule, settings);
  Real rate = res.allocation.rate;
  res.outer_iterations = 1;

  const bool minimize_d = cfg.objective == PipelineObjective::minimize_d;
  for (int iter = 1; iter < 10 && cfg.n_active < rx; ++iter) {
    SelectionInstance inst =
        SelectionInstance::build(model.blocks, res.allocation.pbar_r, cfg.n_active,
                                 minimize_d ? cfg.eta_v : cfg.eta_d);
    const SelectionObjective obj =
        minimize_d ? SelectionObjective::minimize_d : SelectionObjective::minimize_v;
    const auto bracket = initial_bracket(inst, obj);
    const BisectionResult sel =
        minimize_d ? algorithm2(inst, bracket.first, bracket.second, 1e-4 * bracket.second)
                   : select_velocity_variant(inst, bracket.first, bracket.second,
                                             1e-4 * bracket.second);
    res.achieved_eta = sel.eta;
    if (sel.mask.s == res.mask) break;

    AllocationContext next_ctx =
        make_allocation_context(cfg.scenario, model.blocks, sel.mask.s, cfg.eta_d, cfg.eta_v);
    Allocation next = algorithm1(next_ctx, schedule, settings);
    ++res.outer_iterations;
    if (next.rate < rate) break;  // selection must not be allowed to lose rate
    const bool plateau = next.rate - rate <= 1e-4 * std::max<Real>(rate, 1.0);
    res.mask = sel.mask.s;
    res.allocation = std::move(next);
    rate = res.allocation.rate;
    if (plateau) break;
  }

  res.point = evaluate_point(cfg, model, res.allocation, res.mask);
  return res;
}

std::vector<TradeoffPoint> tradeoff_sweep(const RunConfig& cfg, const PipelineModel& model) {
  std::vector<TradeoffPoint> points;
  for (Real eta : cfg.sweep) {
    RunConfig point_cfg = cfg;
    if (cfg.objective == PipelineObjective::minimize_d)
      point_cfg.eta_d = eta;
    else
      point_cfg.eta_v = eta;
    TradeoffPoint pt;
    try {
      const AlternateResult res = alternate(point_cfg, model);
      pt = res.point;
    } catch (const InfeasibleError& e) {
      pt.eta_d_in = point_cfg.eta_d;
      pt.eta_v_in = point_cfg.eta_v;
      pt.feasible = false;
      pt.note = e.what();
    }
    points.push_back(std::move(pt));
  }
  return points;
}

CrbPair crb_at_position(const Scenario& sc, const CovarianceSet& cov, const MatX& radar_weight,
                        const std::vector<int>& mask, int target, const Vec2& position,
                        PhaseConvention convention) {
  Scenario moved = sc;
  moved.target_positions.at(target) = position;
  FimOptions opts;
  opts.convention = convention;

  Mat2 info_d = Mat2::Zero(), info_v = Mat2::Zero();
  const Real df = moved.subcarrier_spacing_hz;
  const Real t_sym = convention == PhaseConvention::literal ? moved.symbol_period_s()
                                                            : moved.symbol_duration_s();
  const Real lr = static_cast<Real>(moved.num_symbols);
  const Real s1 = lr;
  const Real sl = convention == PhaseConvention::literal ? lr * (lr + 1) / 2
                                                         : lr * (lr - 1) / 2;
  const Real sl2 = convention == PhaseConvention::literal
                       ? lr * (lr + 1) * (2 * lr + 1) / 6
                       : (lr - 1) * lr * (2 * lr - 1) / 6;

  const CVec beta = steering_vector(moved, 0, target_aod(moved, target));
  for (int r = 0; r < moved.num_receivers(); ++r) {
    if (mask.at(r) == 0) continue;
    const PathGeometry geo = geometry_partials(moved, target, r);
    const Real loss = radar_pathloss(moved, target, r);
    const Real pref = 8.0 * kPi * kPi * loss * loss / moved.radar_noise_var;
    const Mat2 tau_tau = geo.delay_grad * geo.delay_grad.transpose();
    const Mat2 tau_f = geo.delay_grad * geo.doppler_grad_pos.transpose() +
                       geo.doppler_grad_pos * geo.delay_grad.transpose();
    const Mat2 f_f = geo.doppler_grad_pos * geo.doppler_grad_pos.transpose();
    const Mat2 v_v = geo.doppler_grad_vel * geo.doppler_grad_vel.transpose();
    for (int k = 0; k < moved.num_subcarriers; ++k) {
      const Real ki = convention == PhaseConvention::literal ? static_cast<Real>(k + 1)
                                                             : static_cast<Real>(k);
      const Real kw = ki * df;
      for (int np = 0; np < static_cast<int>(cov.num_subareas); ++np) {
        const Real w = radar_weight(k, np);
        if (w == 0) continue;
        const Real gain = pattern_gain(cov.covariance(k, np), beta);
        info_d += w * pref * gain *
                  (kw * kw * s1 * tau_tau - kw * t_sym * sl * tau_f +
                   t_sym * t_sym * sl2 * f_f);
        info_v += w * pref * gain * t_sym * t_sym * sl2 * v_v;
      }
    }
  }

  CrbPair out;
  const auto invert = [](const Mat2& m) {
    const Real det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const Real scale = m.cwiseAbs().maxCoeff();
    if (!(scale > 0) || std::abs(det) <= 1e-15 * scale * scale)
      throw NumericalError("singular information at heatmap point");
    Mat2 inv;
    inv << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return Mat2(inv / det);
  };
  out.location = invert(info_d);
  out.velocity = invert(info_v);
  return out;
}

std::vector<HeatmapCell> crb_heatmap(const RunConfig& cfg, const PipelineModel& model,
                                     const MatX& radar_weight, const std::vector<int>& mask) {
  std::vector<HeatmapCell> cells;
  const Vec2 center = cfg.scenario.target_positions.at(cfg.heatmap.target);
  const int steps = cfg.heatmap.steps;
  const Real span = cfg.heatmap.span_m;
  for (int iy = 0; iy < steps; ++iy) {
    for (int ix = 0; ix < steps; ++ix) {
      HeatmapCell cell;
      cell.x = center.x() - span / 2 + span * static_cast<Real>(ix) / (steps - 1);
      cell.y = center.y() - span / 2 + span * static_cast<Real>(iy) / (steps - 1);
      try {
        const CrbPair crb = crb_at_position(cfg.scenario, model.cov, radar_weight, mask,
                                            cfg.heatmap.target, Vec2(cell.x, cell.y));
        cell.crb_loc = std::max(crb.location(0, 0), crb.location(1, 1));
        cell.crb_vel = std::max(crb.velocity(0, 0), crb.velocity(1, 1));
      } catch (const NumericalError&) {
        cell.singular = true;
      } catch (const DegenerateGeometryError&) {
        cell.singular = true;
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

std::string mask_bits(const std::vector<int>& mask) {
  std::string bits;
  for (int s : mask) bits += s != 0 ? '1' : '0';
  return bits;
}

namespace {

std::string num(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw NumericalError("cannot open output file '" + path + "'");
  return out;
}

}  // namespace

void write_tradeoff_csv(const std::string& path, const std::vector<TradeoffPoint>& points) {
  auto out = open_csv(path);
  out << "eta_d,eta_v,status,rate_bits_s,crb_x,crb_y,crb_vx,crb_vy,"
         "subcarriers_comm,subcarriers_radar,power_comm_frac,power_radar_frac,mask_bits\n";
  for (const auto& p : points) {
    out << num(p.eta_d_in) << ',' << num(p.eta_v_in) << ','
        << (p.feasible ? "ok" : "infeasible") << ',' << num(p.rate_bits_per_s) << ','
        << num(p.crb_x) << ',' << num(p.crb_y) << ',' << num(p.crb_vx) << ','
        << num(p.crb_vy) << ',' << p.subcarriers_comm << ',' << p.subcarriers_radar << ','
        << num(p.power_comm_frac) << ',' << num(p.power_radar_frac) << ','
        << mask_bits(p.mask) << '\n';
  }
}

void write_crb_csv(const std::string& path, const std::vector<CrbPair>& crb) {
  auto out = open_csv(path);
  out << "n,crb_x,crb_y,crb_vx,crb_vy\n";
  for (size_t n = 0; n < crb.size(); ++n)
    out << n << ',' << num(crb[n].location(0, 0)) << ',' << num(crb[n].location(1, 1)) << ','
        << num(crb[n].velocity(0, 0)) << ',' << num(crb[n].velocity(1, 1)) << '\n';
}

void write_selection_csv(const std::string& path, int n_active, int num_receivers, Real eta,
                         const std::vector<int>& mask) {
  auto out = open_csv(path);
  out << "N_r,R_x,eta_star,mask_bits\n";
  out << n_active << ',' << num_receivers << ',' << num(eta) << ',' << mask_bits(mask)
      << '\n';
}

void write_heatmap_csv(const std::string& path, const std::vector<HeatmapCell>& cells) {
  auto out = open_csv(path);
  out << "x,y,status,crb_loc,crb_vel\n";
  for (const auto& c : cells)
    out << num(c.x) << ',' << num(c.y) << ',' << (c.singular ? "singular" : "ok") << ','
        << num(c.crb_loc) << ',' << num(c.crb_vel) << '\n';
}

void write_pattern_csv(const std::string& path, const Scenario& sc, const CovarianceSet& cov,
                       int k, int n, int num_samples) {
  auto out = open_csv(path);
  out << "theta_deg,gain\n";
  for (int q = 0; q < num_samples; ++q) {
    const Real deg = -90.0 + 180.0 * static_cast<Real>(q) / (num_samples - 1);
    const CVec a = steering_vector(sc, k, deg2rad(deg));
    out << num(deg) << ',' << num(pattern_gain(cov.covariance(k, n), a)) << '\n';
  }
}

void write_ici_csv(const std::string& path, const std::vector<MatX>& residual_per_receiver) {
  auto out = open_csv(path);
  out << "r,k,l,residual_rel\n";
  for (size_t r = 0; r < residual_per_receiver.size(); ++r)
    for (int k = 0; k < residual_per_receiver[r].rows(); ++k)
      for (int l = 0; l < residual_per_receiver[r].cols(); ++l)
        out << r << ',' << k << ',' << l << ',' << num(residual_per_receiver[r](k, l)) << '\n';
}

void write_demod_csv(const std::string& path, const std::vector<CMat>& demod_per_receiver) {
  auto out = open_csv(path);
  out << "r,k,l,re,im\n";
  for (size_t r = 0; r < demod_per_receiver.size(); ++r)
    for (int k = 0; k < demod_per_receiver[r].rows(); ++k)
      for (int l = 0; l < demod_per_receiver[r].cols(); ++l)
        out << r << ',' << k << ',' << l << ',' << num(demod_per_receiver[r](k, l).real())
            << ',' << num(demod_per_receiver[r](k, l).imag()) << '\n';
}

}  // namespace dfrc
