#pragma once

#include <optional>
#include <vector>

#include "dfrc/fim.hpp"
#include "dfrc/types.hpp"

namespace dfrc {

/// Data for the receiver-selection subproblem at a fixed allocation:
/// per-(target, receiver) information blocks B, the Lemma-2 quadratic
/// matrices Q and the diagonal-entry vectors p.
struct SelectionInstance {
  int num_receivers = 0;  // R_x
  int num_targets = 0;    // N
  std::vector<Mat2> b_d;  // index n * R_x + r
  std::vector<Mat2> b_v;
  std::vector<MatX> q_d;  // per target, R_x x R_x
  std::vector<MatX> q_v;
  std::vector<VecX> p_d1, p_d2, p_v1, p_v2;  // per target
  int cardinality = 0;    // N_r
  Real eta_fixed = 0;     // the bound held constant during the search

  const Mat2& block_d(int n, int r) const { return b_d[n * num_receivers + r]; }
  const Mat2& block_v(int n, int r) const { return b_v[n * num_receivers + r]; }

  /// Assembles B_{n,r} = sum_{k,n'} w(k,n') D_n(r,k,n') (and the velocity
  /// analog) from the information blocks and the fixed allocation weights.
  static SelectionInstance build(const FimBlocks& blocks, const MatX& radar_weight,
                                 int cardinality, Real eta_fixed);
};

enum class CrbKind { location, velocity };

/// Lemma-2 rational form s^T p / (s^T Q s) for one target and diagonal
/// entry 1 or 2. Valid for arbitrary real weights, not just binary masks.
Real rational_crb_target(const SelectionInstance& inst, int target, const VecX& weights,
                         CrbKind kind, int entry);

/// Worst (largest) rational CRB entry over all targets.
Real rational_crb(const SelectionInstance& inst, const VecX& weights, CrbKind kind, int entry);

/// Quadratic constraint record for s^T (Z - lambda I) s + (2/eta) s^T p +
/// lambda N_r <= 0 with Z = -(Q + Q^T) shifted PSD.
struct ConvexifiedConstraint {
  MatX z_shift;  // Z - lambda_min(Z) I, PSD
  VecX linear;   // (2/eta) p
  Real constant; // lambda_min(Z) * N_r
  Real min_eigenvalue;  // of Z before the shift

  Real evaluate(const VecX& s) const {
    return s.dot(z_shift * s) + linear.dot(s) + constant;
  }
};

ConvexifiedConstraint convexify(const MatX& q, const VecX& p, Real eta, int cardinality);

/// Binary selection with its achieved bounds.
struct ReceiverMask {
  std::vector<int> s;
  Real achieved_eta_d = 0;
  Real achieved_eta_v = 0;
};

enum class SelectionObjective { minimize_d, minimize_v };

/// First (lexicographically) cardinality-N_r subset meeting eta_obj on the
/// objective entries and eta_fixed on the others, checked through the exact
/// rational forms; nullopt when none exists.
std::optional<ReceiverMask> feasible_mask(const SelectionInstance& inst, Real eta_obj,
                                          SelectionObjective obj = SelectionObjective::minimize_d);

struct BisectionResult {
  Real eta = 0;
  ReceiverMask mask;
  int iterations = 0;
};

/// Bisection on the location bound; requires an invalid/valid bracket
/// (infeasible at eta_lo, feasible at eta_hi) and halves it to width eps.
BisectionResult algorithm2(const SelectionInstance& inst, Real eta_lo, Real eta_hi, Real eps);

/// Same search with the velocity bound as the objective and eta_fixed
/// interpreted as the location bound.
BisectionResult select_velocity_variant(const SelectionInstance& inst, Real eta_lo, Real eta_hi,
                                        Real eps);

/// Valid bracket for algorithm2: lower end from the all-receivers bound,
/// upper end expanded geometrically until feasible. Throws InfeasibleError
/// when no subset can satisfy the fixed bound.
std::pair<Real, Real> initial_bracket(const SelectionInstance& inst,
                                      SelectionObjective obj = SelectionObjective::minimize_d);

/// Enumeration oracle: the exact minimum achievable objective bound over all
/// cardinality-N_r subsets (subject to the fixed bound), with its mask.
std::optional<std::pair<Real, ReceiverMask>> enumerate_optimum(
    const SelectionInstance& inst, SelectionObjective obj = SelectionObjective::minimize_d);

}  // namespace dfrc
