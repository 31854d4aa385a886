#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dfrc/allocation.hpp"
#include "dfrc/config.hpp"
#include "dfrc/selection.hpp"

namespace dfrc {

/// Scenario-level artifacts shared by the pipeline drivers: the designed
/// covariances and the analytic information blocks.
struct PipelineModel {
  CovarianceSet cov;
  FimBlocks blocks;
};

PipelineModel build_model(const RunConfig& cfg);

/// One point of the rate/CRB tradeoff.
struct TradeoffPoint {
  Real eta_d_in = 0;
  Real eta_v_in = 0;
  bool feasible = false;
  Real rate_bits_per_s = 0;  // (1/T) * sum of subcarrier rates
  Real crb_x = 0, crb_y = 0, crb_vx = 0, crb_vy = 0;  // worst over targets
  std::vector<int> mask;
  Allocation allocation;
  int subcarriers_comm = 0, subcarriers_radar = 0;
  Real power_comm_frac = 0, power_radar_frac = 0;
  std::string note;
};

struct AlternateResult {
  Allocation allocation;
  std::vector<int> mask;
  Real achieved_eta = 0;  // objective bound achieved by the final mask
  int outer_iterations = 0;
  TradeoffPoint point;
};

/// Alternates the allocation subproblem with receiver selection until the
/// mask repeats, the rate plateaus (relative 1e-4) or 10 outer rounds.
AlternateResult alternate(const RunConfig& cfg, const PipelineModel& model);

/// Tradeoff-point summary of an allocation: rate in bits/s, worst-target CRB
/// diagonals re-evaluated through the information blocks, resource splits.
TradeoffPoint evaluate_point(const RunConfig& cfg, const PipelineModel& model,
                             const Allocation& alloc, const std::vector<int>& mask);

/// One tradeoff point per sweep value; infeasible points are recorded and
/// the sweep continues.
std::vector<TradeoffPoint> tradeoff_sweep(const RunConfig& cfg, const PipelineModel& model);

struct HeatmapCell {
  Real x = 0, y = 0;
  bool singular = false;
  Real crb_loc = 0;  // max diagonal of the location CRB
  Real crb_vel = 0;
};

/// CRB re-evaluated on a position grid around one target with the transmit
/// side (allocation, beams, mask) held fixed.
std::vector<HeatmapCell> crb_heatmap(const RunConfig& cfg, const PipelineModel& model,
                                     const MatX& radar_weight, const std::vector<int>& mask);

/// CRB of a hypothetical target position under a fixed allocation.
CrbPair crb_at_position(const Scenario& sc, const CovarianceSet& cov, const MatX& radar_weight,
                        const std::vector<int>& mask, int target, const Vec2& position,
                        PhaseConvention convention = PhaseConvention::literal);

std::string mask_bits(const std::vector<int>& mask);

// CSV writers. All emit a header row; numeric cells use max-precision for
// re-verifiable quantities.
void write_tradeoff_csv(const std::string& path, const std::vector<TradeoffPoint>& points);
void write_crb_csv(const std::string& path, const std::vector<CrbPair>& crb);
void write_selection_csv(const std::string& path, int n_active, int num_receivers, Real eta,
                         const std::vector<int>& mask);
void write_heatmap_csv(const std::string& path, const std::vector<HeatmapCell>& cells);
void write_pattern_csv(const std::string& path, const Scenario& sc, const CovarianceSet& cov,
                       int k, int n, int num_samples = 181);
void write_ici_csv(const std::string& path, const std::vector<MatX>& residual_per_receiver);
void write_demod_csv(const std::string& path, const std::vector<CMat>& demod_per_receiver);

/// CLI entry: subcommands beampattern, verify-ici, crb, allocate, select,
/// alternate, tradeoff, heatmap. Exit codes: 0 success, 2 infeasible,
/// 3 config error, 4 numerical failure.
int run_cli(int argc, char** argv);

}  // namespace dfrc
