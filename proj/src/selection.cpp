#include "dfrc/selection.hpp"

#include <cmath>

namespace dfrc {

namespace {

/// Visits all cardinality-m subsets of {0..n-1} in lexicographic order.
template <typename F>
void for_each_subset(int n, int m, F&& visit) {
  if (m < 0 || m > n) return;
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = i;
  while (true) {
    if (!visit(idx)) return;
    int i = m - 1;
    while (i >= 0 && idx[i] == n - m + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
}

VecX mask_to_weights(const std::vector<int>& idx, int n) {
  VecX s = VecX::Zero(n);
  for (int i : idx) s(i) = 1.0;
  return s;
}

struct Entries {
  Real d1, d2, v1, v2;
};

std::optional<Entries> subset_entries(const SelectionInstance& inst, const VecX& s) {
  Entries e{};
  try {
    e.d1 = rational_crb(inst, s, CrbKind::location, 1);
    e.d2 = rational_crb(inst, s, CrbKind::location, 2);
    e.v1 = rational_crb(inst, s, CrbKind::velocity, 1);
    e.v2 = rational_crb(inst, s, CrbKind::velocity, 2);
  } catch (const NumericalError&) {
    return std::nullopt;  // singular information for this subset
  }
  return e;
}

}  // namespace

SelectionInstance SelectionInstance::build(const FimBlocks& blocks, const MatX& radar_weight,
                                           int cardinality, Real eta_fixed) {
  SelectionInstance inst;
  inst.num_receivers = blocks.num_receivers;
  inst.num_targets = blocks.num_targets;
  inst.cardinality = cardinality;
  inst.eta_fixed = eta_fixed;
  inst.b_d.assign(static_cast<size_t>(inst.num_targets) * inst.num_receivers, Mat2::Zero());
  inst.b_v.assign(inst.b_d.size(), Mat2::Zero());

  for (int n = 0; n < inst.num_targets; ++n) {
    for (int r = 0; r < inst.num_receivers; ++r) {
      Mat2 bd = Mat2::Zero(), bv = Mat2::Zero();
      for (int k = 0; k < blocks.num_subcarriers; ++k) {
        for (int np = 0; np < inst.num_targets; ++np) {
          const Real w = radar_weight(k, np);
          if (w == 0) continue;
          bd += w * blocks.location(n, r, k, np);
          bv += w * blocks.velocity(n, r, k, np);
        }
      }
      inst.b_d[n * inst.num_receivers + r] = bd;
      inst.b_v[n * inst.num_receivers + r] = bv;
    }
  }

  inst.q_d.resize(inst.num_targets);
  inst.q_v.resize(inst.num_targets);
  inst.p_d1.resize(inst.num_targets);
  inst.p_d2.resize(inst.num_targets);
  inst.p_v1.resize(inst.num_targets);
  inst.p_v2.resize(inst.num_targets);
  const int rx = inst.num_receivers;
  for (int n = 0; n < inst.num_targets; ++n) {
    inst.q_d[n].resize(rx, rx);
    inst.q_v[n].resize(rx, rx);
    inst.p_d1[n].resize(rx);
    inst.p_d2[n].resize(rx);
    inst.p_v1[n].resize(rx);
    inst.p_v2[n].resize(rx);
    for (int r = 0; r < rx; ++r) {
      const Mat2& bd = inst.block_d(n, r);
      const Mat2& bv = inst.block_v(n, r);
      inst.p_d1[n](r) = bd(1, 1);
      inst.p_d2[n](r) = bd(0, 0);
      inst.p_v1[n](r) = bv(1, 1);
      inst.p_v2[n](r) = bv(0, 0);
      for (int rp = 0; rp < rx; ++rp) {
        const Mat2& bdp = inst.block_d(n, rp);
        const Mat2& bvp = inst.block_v(n, rp);
        inst.q_d[n](r, rp) = bd(0, 0) * bdp(1, 1) - bd(0, 1) * bdp(1, 0);
        inst.q_v[n](r, rp) = bv(0, 0) * bvp(1, 1) - bv(0, 1) * bvp(1, 0);
      }
    }
  }
  return inst;
}

Real rational_crb_target(const SelectionInstance& inst, int target, const VecX& weights,
                         CrbKind kind, int entry) {
  if (entry != 1 && entry != 2) throw ConfigError("rational_crb: entry must be 1 or 2");
  const MatX& q = kind == CrbKind::location ? inst.q_d.at(target) : inst.q_v.at(target);
  const VecX& p = kind == CrbKind::location
                      ? (entry == 1 ? inst.p_d1[target] : inst.p_d2[target])
                      : (entry == 1 ? inst.p_v1[target] : inst.p_v2[target]);
  const Real denom = weights.dot(q * weights);
  const Real scale = q.cwiseAbs().maxCoeff() * weights.squaredNorm();
  if (std::abs(denom) <= 1e-15 * std::max<Real>(scale, 1e-300))
    throw NumericalError("rational_crb: singular information for target " +
                         std::to_string(target));
  return p.dot(weights) / denom;
}

Real rational_crb(const SelectionInstance& inst, const VecX& weights, CrbKind kind, int entry) {
  Real worst = -std::numeric_limits<Real>::infinity();
  for (int n = 0; n < inst.num_targets; ++n)
    worst = std::max(worst, rational_crb_target(inst, n, weights, kind, entry));
  return worst;
}

ConvexifiedConstraint convexify(const MatX& q, const VecX& p, Real eta, int cardinality) {
  if (eta <= 0) throw ConfigError("convexify: eta must be positive");
  ConvexifiedConstraint c;
  const MatX z = -(q + q.transpose());
  Eigen::SelfAdjointEigenSolver<MatX> eig(z);
  c.min_eigenvalue = eig.eigenvalues().minCoeff();
  c.z_shift = z - c.min_eigenvalue * MatX::Identity(q.rows(), q.cols());
  c.linear = (2.0 / eta) * p;
  c.constant = c.min_eigenvalue * static_cast<Real>(cardinality);
  return c;
}

std::optional<ReceiverMask> feasible_mask(const SelectionInstance& inst, Real eta_obj,
                                          SelectionObjective obj) {
  const Real eta_d = obj == SelectionObjective::minimize_d ? eta_obj : inst.eta_fixed;
  const Real eta_v = obj == SelectionObjective::minimize_d ? inst.eta_fixed : eta_obj;
  std::optional<ReceiverMask> found;
  for_each_subset(inst.num_receivers, inst.cardinality, [&](const std::vector<int>& idx) {
    const VecX s = mask_to_weights(idx, inst.num_receivers);
    const auto e = subset_entries(inst, s);
    if (e && std::max(e->d1, e->d2) <= eta_d && std::max(e->v1, e->v2) <= eta_v) {
      ReceiverMask m;
      m.s.assign(inst.num_receivers, 0);
      for (int i : idx) m.s[i] = 1;
      m.achieved_eta_d = std::max(e->d1, e->d2);
      m.achieved_eta_v = std::max(e->v1, e->v2);
      found = std::move(m);
      return false;  // lexicographically first hit wins
    }
    return true;
  });
  return found;
}

namespace {

BisectionResult bisect(const SelectionInstance& inst, Real eta_lo, Real eta_hi, Real eps,
                       SelectionObjective obj) {
  if (!(eta_lo < eta_hi) || eps <= 0)
    throw ConfigError("algorithm2: need eta_lo < eta_hi and eps > 0");
  auto hi_mask = feasible_mask(inst, eta_hi, obj);
  if (!hi_mask) throw InfeasibleError("algorithm2: bracket upper end is infeasible");
  if (feasible_mask(inst, eta_lo, obj))
    throw InfeasibleError("algorithm2: bracket lower end is already feasible");

  BisectionResult res;
  while (eta_hi - eta_lo > eps) {
    const Real mid = 0.5 * (eta_lo + eta_hi);
    auto m = feasible_mask(inst, mid, obj);
    if (m) {
      eta_hi = mid;
      hi_mask = std::move(m);
    } else {
      eta_lo = mid;
    }
    ++res.iterations;
  }
  res.eta = eta_hi;
  res.mask = *hi_mask;
  return res;
}

}  // namespace

BisectionResult algorithm2(const SelectionInstance& inst, Real eta_lo, Real eta_hi, Real eps) {
  return bisect(inst, eta_lo, eta_hi, eps, SelectionObjective::minimize_d);
}

BisectionResult select_velocity_variant(const SelectionInstance& inst, Real eta_lo, Real eta_hi,
                                        Real eps) {
  return bisect(inst, eta_lo, eta_hi, eps, SelectionObjective::minimize_v);
}

std::pair<Real, Real> initial_bracket(const SelectionInstance& inst, SelectionObjective obj) {
  const VecX all = VecX::Ones(inst.num_receivers);
  const CrbKind kind = obj == SelectionObjective::minimize_d ? CrbKind::location
                                                             : CrbKind::velocity;
  const Real best_possible = std::max(rational_crb(inst, all, kind, 1),
                                      rational_crb(inst, all, kind, 2));

  // Largest achieved bound over the candidate subsets gives a feasible upper end.
  Real worst_subset = 0;
  bool any = false;
  for_each_subset(inst.num_receivers, inst.cardinality, [&](const std::vector<int>& idx) {
    const VecX s = mask_to_weights(idx, inst.num_receivers);
    if (const auto e = subset_entries(inst, s)) {
      const Real objective = kind == CrbKind::location ? std::max(e->d1, e->d2)
                                                       : std::max(e->v1, e->v2);
      const Real fixed = kind == CrbKind::location ? std::max(e->v1, e->v2)
                                                   : std::max(e->d1, e->d2);
      if (fixed <= inst.eta_fixed) {
        worst_subset = std::max(worst_subset, objective);
        any = true;
      }
    }
    return true;
  });
  if (!any)
    throw InfeasibleError("initial_bracket: no subset satisfies the fixed CRB bound");

  Real lo = 0.5 * best_possible;
  Real hi = 2.0 * worst_subset;
  for (int grow = 0; feasible_mask(inst, lo, obj) && grow < 60; ++grow) lo *= 0.5;
  for (int grow = 0; !feasible_mask(inst, hi, obj) && grow < 60; ++grow) hi *= 2.0;
  return {lo, hi};
}

std::optional<std::pair<Real, ReceiverMask>> enumerate_optimum(const SelectionInstance& inst,
                                                               SelectionObjective obj) {
  std::optional<std::pair<Real, ReceiverMask>> best;
  for_each_subset(inst.num_receivers, inst.cardinality, [&](const std::vector<int>& idx) {
    const VecX s = mask_to_weights(idx, inst.num_receivers);
    const auto e = subset_entries(inst, s);
    if (!e) return true;
    const Real objective = obj == SelectionObjective::minimize_d ? std::max(e->d1, e->d2)
                                                                 : std::max(e->v1, e->v2);
    const Real fixed = obj == SelectionObjective::minimize_d ? std::max(e->v1, e->v2)
                                                             : std::max(e->d1, e->d2);
    if (fixed > inst.eta_fixed) return true;
    if (!best || objective < best->first) {
      ReceiverMask m;
      m.s.assign(inst.num_receivers, 0);
      for (int i : idx) m.s[i] = 1;
      m.achieved_eta_d = std::max(e->d1, e->d2);
      m.achieved_eta_v = std::max(e->v1, e->v2);
      best = {objective, std::move(m)};
    }
    return true;
  });
  return best;
}

}  // namespace dfrc
