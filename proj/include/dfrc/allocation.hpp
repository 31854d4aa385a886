#pragma once

#include <vector>

#include "dfrc/conic.hpp"
#include "dfrc/fim.hpp"
#include "dfrc/scenario.hpp"
#include "dfrc/types.hpp"

namespace dfrc {

/// Joint subcarrier/power assignment. Relaxed iterates carry fractional
/// sigma values; binary results place power only on the owning entry.
struct Allocation {
  MatX sigma_c;  // K x M in [0, 1]
  MatX sigma_r;  // K x N
  MatX pbar_c;   // K x M, watts
  MatX pbar_r;   // K x N, watts
  Real rate = 0;       // sum over (k, m) of the perspective rate, bits/s/Hz
  Real violation = 0;  // total DC violation sum sigma (1 - sigma)
  bool binary = false;
  bool penalty_converged = true;  // false when the loop ended with violation > 1e-4
};

struct PenaltySchedule {
  Real beta0 = 1e-3;
  Real gamma = 3.0;
  Real beta_max = 1e3;
  Real epsilon = 1e-4;  // stop on |rate_j - rate_{j-1}|
  int max_outer = 30;
};

/// Scenario-derived constants for one allocation subproblem: communication
/// gains and the mask-summed LMI coefficient entries per target.
struct AllocationContext {
  int num_subcarriers = 0;
  int num_users = 0;
  int num_targets = 0;
  Real power_budget_w = 0;
  Real eta_d = 0;
  Real eta_v = 0;
  MatX comm_gain;  // K x M: |h|^2 / sigma_z^2
  struct LmiCoeff {
    MatX d11, d12, d22;  // each K x N, summed over active receivers
    MatX v11, v12, v22;
  };
  std::vector<LmiCoeff> coeff;  // per target
  std::vector<int> mask;
};

AllocationContext make_allocation_context(const Scenario& sc, const FimBlocks& blocks,
                                          const std::vector<int>& mask, Real eta_d, Real eta_v);

/// Assembles the penalized convex subproblem at the given linearization
/// point: perspective rates minus beta times the total violation, row-sum
/// equalities, the power budget, the four CRB cones per target and the DC
/// Taylor cuts.
conic::Problem build_subproblem(const AllocationContext& ctx, const MatX& sigma_c_lin,
                                const MatX& sigma_r_lin, Real beta);

/// True when some detection power split within the budget meets the CRB
/// bounds (all power available to detection).
bool feasibility_probe(const AllocationContext& ctx, const conic::Settings& settings = {});

struct Algorithm1Trace {
  std::vector<Real> rate;
  std::vector<Real> violation;
  std::vector<Real> beta;
  Allocation relaxed;  // final penalty-loop iterate before rounding
};

/// Penalty loop over the relaxed subproblem followed by argmax rounding and
/// a power-only restoration solve. Throws InfeasibleError when the CRB
/// bounds are unreachable, NumericalError when the rounded assignment
/// cannot be restored.
Allocation algorithm1(const AllocationContext& ctx, const PenaltySchedule& schedule = {},
                      const conic::Settings& settings = {}, Algorithm1Trace* trace = nullptr);

/// Argmax rounding plus exact power re-optimization with the binary
/// assignment fixed.
Allocation round_and_restore(const AllocationContext& ctx, const Allocation& relaxed,
                             const conic::Settings& settings = {});

/// Objective of the penalized subproblem at a given point with the slacks
/// tight: rate(sigma, pbar) - beta * violation(sigma).
Real penalized_objective(const AllocationContext& ctx, const Allocation& a, Real beta);

/// Total DC violation sum sigma (1 - sigma) over both blocks.
Real dc_violation(const MatX& sigma_c, const MatX& sigma_r);

/// Relaxed rate sum of an allocation under the context gains.
Real allocation_rate(const AllocationContext& ctx, const Allocation& a);

/// Re-evaluates the CRB of a binary allocation through the information
/// blocks and checks the bounds with the given absolute slack.
bool verify_allocation(const FimBlocks& blocks, const Allocation& a,
                       const std::vector<int>& mask, Real eta_d, Real eta_v,
                       Real slack = 1e-6);

}  // namespace dfrc
