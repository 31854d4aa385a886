#include "dfrc/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "dfrc/waveform.hpp"

namespace dfrc {

namespace {

constexpr Real kSigmaFloor = 1e-9;  // keeps the perspective term smooth

/// Variable layout of the relaxed subproblem.
struct Layout {
  int k_count, m_count, n_count;
  int sigma_c(int k, int m) const { return k * m_count + m; }
  int sigma_r(int k, int n) const { return k_count * m_count + k * n_count + n; }
  int pbar_c(int k, int m) const { return k_count * (m_count + n_count) + k * m_count + m; }
  int pbar_r(int k, int n) const {
    return k_count * (2 * m_count + n_count) + k * n_count + n;
  }
  int alpha(int k, int n) const {
    return k_count * 2 * (m_count + n_count) + k * n_count + n;
  }
  int delta(int k, int m) const {
    return k_count * (2 * (m_count + n_count) + n_count) + k * m_count + m;
  }
  int total() const { return k_count * 3 * (m_count + n_count); }
};

void append_crb_cones(const AllocationContext& ctx, conic::Problem& prob,
                      const std::vector<std::vector<int>>& pbar_r_vars) {
  const int k_count = ctx.num_subcarriers;
  const int n_count = ctx.num_targets;
  for (int n = 0; n < n_count; ++n) {
    const auto& c = ctx.coeff[n];
    struct Spec {
      const MatX* a;  // multiplies eta in the (2,2) slot
      const MatX* b;  // off-diagonal
      const MatX* d;  // (1,1) slot
      Real eta;
      const char* tag;
    };
    const Spec specs[4] = {
        {&c.d11, &c.d12, &c.d22, ctx.eta_d, "d1"},
        {&c.d22, &c.d12, &c.d11, ctx.eta_d, "d2"},
        {&c.v11, &c.v12, &c.v22, ctx.eta_v, "v1"},
        {&c.v22, &c.v12, &c.v11, ctx.eta_v, "v2"},
    };
    for (const auto& s : specs) {
      conic::RotatedCone cone;
      cone.v.constant = -1.0;
      const Real sqrt_eta = std::sqrt(s.eta);
      for (int k = 0; k < k_count; ++k) {
        for (int np = 0; np < n_count; ++np) {
          const int var = pbar_r_vars[k][np];
          cone.u.add(var, (*s.d)(k, np));
          cone.w.add(var, sqrt_eta * (*s.b)(k, np));
          cone.v.add(var, s.eta * (*s.a)(k, np));
        }
      }
      prob.cones.push_back(std::move(cone));
      prob.cone_names.push_back("crb_" + std::string(s.tag) + "_target" + std::to_string(n));
    }
  }
}

Allocation extract(const AllocationContext& ctx, const Layout& lay, const VecX& x) {
  Allocation a;
  a.sigma_c.resize(lay.k_count, lay.m_count);
  a.sigma_r.resize(lay.k_count, lay.n_count);
  a.pbar_c.resize(lay.k_count, lay.m_count);
  a.pbar_r.resize(lay.k_count, lay.n_count);
  for (int k = 0; k < lay.k_count; ++k) {
    for (int m = 0; m < lay.m_count; ++m) {
      a.sigma_c(k, m) = x(lay.sigma_c(k, m));
      a.pbar_c(k, m) = x(lay.pbar_c(k, m));
    }
    for (int n = 0; n < lay.n_count; ++n) {
      a.sigma_r(k, n) = x(lay.sigma_r(k, n));
      a.pbar_r(k, n) = x(lay.pbar_r(k, n));
    }
  }
  a.rate = allocation_rate(ctx, a);
  a.violation = dc_violation(a.sigma_c, a.sigma_r);
  return a;
}


std::vector<SubcarrierOwner> argmax_owners(const AllocationContext& ctx,
                                           const Allocation& relaxed) {
  std::vector<SubcarrierOwner> owner(ctx.num_subcarriers);
  for (int k = 0; k < ctx.num_subcarriers; ++k) {
    Real best = -1;
    for (int m = 0; m < ctx.num_users; ++m)
      if (relaxed.sigma_c(k, m) > best) {
        best = relaxed.sigma_c(k, m);
        owner[k] = {true, m};
      }
    for (int n = 0; n < ctx.num_targets; ++n)
      if (relaxed.sigma_r(k, n) > best) {
        best = relaxed.sigma_r(k, n);
        owner[k] = {false, n};
      }
  }
  return owner;
}

/// Power-only solve under a fixed binary assignment; nullopt if infeasible.
std::optional<Allocation> solve_power_for_owners(const AllocationContext& ctx,
                                                 const std::vector<SubcarrierOwner>& owner,
                                                 const conic::Settings& settings) {
  const int k_count = ctx.num_subcarriers;
  conic::Problem prob;
  std::vector<int> pvar(k_count);
  for (int k = 0; k < k_count; ++k)
    pvar[k] = prob.add_variable("p_" + std::to_string(k), 0.0, ctx.power_budget_w);
  conic::LinExpr power(-ctx.power_budget_w);
  for (int k = 0; k < k_count; ++k) power.add(pvar[k], 1.0);
  prob.ineq.push_back(std::move(power));
  prob.ineq_names.push_back("total_power");
  for (int k = 0; k < k_count; ++k)
    if (owner[k].is_comm)
      prob.rates.push_back({-1, pvar[k], ctx.comm_gain(k, owner[k].index), 1.0});

  for (int n = 0; n < ctx.num_targets; ++n) {
    const auto& c = ctx.coeff[n];
    struct Spec {
      const MatX* a;
      const MatX* b;
      const MatX* d;
      Real eta;
      const char* tag;
    };
    const Spec specs[4] = {
        {&c.d11, &c.d12, &c.d22, ctx.eta_d, "d1"},
        {&c.d22, &c.d12, &c.d11, ctx.eta_d, "d2"},
        {&c.v11, &c.v12, &c.v22, ctx.eta_v, "v1"},
        {&c.v22, &c.v12, &c.v11, ctx.eta_v, "v2"},
    };
    for (const auto& s : specs) {
      conic::RotatedCone cone;
      cone.v.constant = -1.0;
      const Real sqrt_eta = std::sqrt(s.eta);
      for (int k = 0; k < k_count; ++k) {
        if (owner[k].is_comm) continue;
        const int np = owner[k].index;
        cone.u.add(pvar[k], (*s.d)(k, np));
        cone.w.add(pvar[k], sqrt_eta * (*s.b)(k, np));
        cone.v.add(pvar[k], s.eta * (*s.a)(k, np));
      }
      prob.cones.push_back(std::move(cone));
      prob.cone_names.push_back("crb_" + std::string(s.tag) + "_target" + std::to_string(n));
    }
  }

  prob.start = VecX::Constant(k_count, ctx.power_budget_w / (2.0 * static_cast<Real>(k_count)));
  const conic::Solution sol = conic::solve(prob, settings);
  if (sol.status == conic::SolveStatus::infeasible) return std::nullopt;

  Allocation out;
  out.sigma_c = MatX::Zero(k_count, ctx.num_users);
  out.sigma_r = MatX::Zero(k_count, ctx.num_targets);
  out.pbar_c = MatX::Zero(k_count, ctx.num_users);
  out.pbar_r = MatX::Zero(k_count, ctx.num_targets);
  for (int k = 0; k < k_count; ++k) {
    if (owner[k].is_comm) {
      out.sigma_c(k, owner[k].index) = 1.0;
      out.pbar_c(k, owner[k].index) = sol.x(pvar[k]);
    } else {
      out.sigma_r(k, owner[k].index) = 1.0;
      out.pbar_r(k, owner[k].index) = sol.x(pvar[k]);
    }
  }
  out.rate = allocation_rate(ctx, out);
  out.violation = 0.0;
  out.binary = true;
  return out;
}

/// Deterministic first-improvement search over single-owner changes. The
/// relaxed solution leaves near-ties in which subcarriers carry detection
/// duty; one-flip moves resolve them against the exact restored rate.
Allocation improve_owners(const AllocationContext& ctx, std::vector<SubcarrierOwner> owner,
                          Allocation incumbent, const conic::Settings& settings) {
  const int choices = ctx.num_users + ctx.num_targets;
  for (int accepted = 0; accepted < 8 * ctx.num_subcarriers;) {
    bool improved = false;
    for (int k = 0; k < ctx.num_subcarriers && !improved; ++k) {
      const SubcarrierOwner original = owner[k];
      for (int c = 0; c < choices; ++c) {
        const SubcarrierOwner cand =
            c < ctx.num_users ? SubcarrierOwner{true, c}
                              : SubcarrierOwner{false, c - ctx.num_users};
        if (cand.is_comm == original.is_comm && cand.index == original.index) continue;
        owner[k] = cand;
        const auto trial = solve_power_for_owners(ctx, owner, settings);
        if (trial && trial->rate > incumbent.rate * (1.0 + 1e-9)) {
          incumbent = *trial;
          improved = true;
          ++accepted;
          break;
        }
        owner[k] = original;
      }
    }
    if (!improved) break;
  }
  return incumbent;
}

}  // namespace

AllocationContext make_allocation_context(const Scenario& sc, const FimBlocks& blocks,
                                          const std::vector<int>& mask, Real eta_d,
                                          Real eta_v) {
  if (eta_d <= 0 || eta_v <= 0) throw ConfigError("CRB bounds must be positive");
  AllocationContext ctx;
  ctx.num_subcarriers = sc.num_subcarriers;
  ctx.num_users = sc.num_users();
  ctx.num_targets = sc.num_targets();
  ctx.power_budget_w = sc.total_power_w;
  ctx.eta_d = eta_d;
  ctx.eta_v = eta_v;
  ctx.mask = mask;

  ctx.comm_gain.resize(ctx.num_subcarriers, ctx.num_users);
  for (int k = 0; k < ctx.num_subcarriers; ++k)
    for (int m = 0; m < ctx.num_users; ++m)
      ctx.comm_gain(k, m) = comm_channel(sc, k, m).squaredNorm() / sc.comm_noise_var;

  ctx.coeff.resize(ctx.num_targets);
  for (int n = 0; n < ctx.num_targets; ++n) {
    auto& c = ctx.coeff[n];
    c.d11 = MatX::Zero(ctx.num_subcarriers, ctx.num_targets);
    c.d12 = c.d11;
    c.d22 = c.d11;
    c.v11 = c.d11;
    c.v12 = c.d11;
    c.v22 = c.d11;
    for (int r = 0; r < blocks.num_receivers; ++r) {
      if (mask.at(r) == 0) continue;
      for (int k = 0; k < ctx.num_subcarriers; ++k) {
        for (int np = 0; np < ctx.num_targets; ++np) {
          const Mat2& d = blocks.location(n, r, k, np);
          const Mat2& v = blocks.velocity(n, r, k, np);
          c.d11(k, np) += d(0, 0);
          c.d12(k, np) += d(0, 1);
          c.d22(k, np) += d(1, 1);
          c.v11(k, np) += v(0, 0);
          c.v12(k, np) += v(0, 1);
          c.v22(k, np) += v(1, 1);
        }
      }
    }
  }
  return ctx;
}

conic::Problem build_subproblem(const AllocationContext& ctx, const MatX& sigma_c_lin,
                                const MatX& sigma_r_lin, Real beta) {
  const Layout lay{ctx.num_subcarriers, ctx.num_users, ctx.num_targets};
  conic::Problem prob;

  for (int k = 0; k < lay.k_count; ++k)
    for (int m = 0; m < lay.m_count; ++m)
      prob.add_variable("sigma_c_" + std::to_string(k) + "_" + std::to_string(m), kSigmaFloor,
                        1.0);
  for (int k = 0; k < lay.k_count; ++k)
    for (int n = 0; n < lay.n_count; ++n)
      prob.add_variable("sigma_r_" + std::to_string(k) + "_" + std::to_string(n), kSigmaFloor,
                        1.0);
  for (int k = 0; k < lay.k_count; ++k)
    for (int m = 0; m < lay.m_count; ++m)
      prob.add_variable("pbar_c_" + std::to_string(k) + "_" + std::to_string(m), 0.0);
  for (int k = 0; k < lay.k_count; ++k)
    for (int n = 0; n < lay.n_count; ++n)
      prob.add_variable("pbar_r_" + std::to_string(k) + "_" + std::to_string(n), 0.0);
  // DC cut values never exceed 1 on the sigma box, so the slacks live in a
  // tight box of their own.
  for (int k = 0; k < lay.k_count; ++k)
    for (int n = 0; n < lay.n_count; ++n)
      prob.add_variable("alpha_" + std::to_string(k) + "_" + std::to_string(n), 0.0, 2.0);
  for (int k = 0; k < lay.k_count; ++k)
    for (int m = 0; m < lay.m_count; ++m)
      prob.add_variable("delta_" + std::to_string(k) + "_" + std::to_string(m), 0.0, 2.0);

  // Rate terms and the penalty -beta (sum alpha + sum delta).
  for (int k = 0; k < lay.k_count; ++k)
    for (int m = 0; m < lay.m_count; ++m)
      prob.rates.push_back({lay.sigma_c(k, m), lay.pbar_c(k, m), ctx.comm_gain(k, m), 1.0});
  for (int k = 0; k < lay.k_count; ++k) {
    for (int n = 0; n < lay.n_count; ++n) prob.linear_objective(lay.alpha(k, n)) = -beta;
    for (int m = 0; m < lay.m_count; ++m) prob.linear_objective(lay.delta(k, m)) = -beta;
  }

  // Row sums: exactly one owner per subcarrier.
  for (int k = 0; k < lay.k_count; ++k) {
    conic::LinExpr row(-1.0);
    for (int m = 0; m < lay.m_count; ++m) row.add(lay.sigma_c(k, m), 1.0);
    for (int n = 0; n < lay.n_count; ++n) row.add(lay.sigma_r(k, n), 1.0);
    prob.eq.push_back(std::move(row));
  }

  // Total power budget.
  {
    conic::LinExpr power(-ctx.power_budget_w);
    for (int k = 0; k < lay.k_count; ++k) {
      for (int m = 0; m < lay.m_count; ++m) power.add(lay.pbar_c(k, m), 1.0);
      for (int n = 0; n < lay.n_count; ++n) power.add(lay.pbar_r(k, n), 1.0);
    }
    prob.ineq.push_back(std::move(power));
    prob.ineq_names.push_back("total_power");
  }

  // CRB cones.
  std::vector<std::vector<int>> pbar_r_vars(lay.k_count, std::vector<int>(lay.n_count));
  for (int k = 0; k < lay.k_count; ++k)
    for (int n = 0; n < lay.n_count; ++n) pbar_r_vars[k][n] = lay.pbar_r(k, n);
  append_crb_cones(ctx, prob, pbar_r_vars);

  // Ownership links p_bar <= P_max sigma, valid for every (p, sigma) of the
  // unrelaxed problem since p_bar = p_k sigma and p_k <= P_max. Without them
  // the relaxation strands detection power on subcarriers nobody owns.
  for (int k = 0; k < lay.k_count; ++k) {
    for (int m = 0; m < lay.m_count; ++m) {
      conic::LinExpr link;
      link.add(lay.pbar_c(k, m), 1.0);
      link.add(lay.sigma_c(k, m), -ctx.power_budget_w);
      prob.ineq.push_back(std::move(link));
      prob.ineq_names.push_back("link_c_" + std::to_string(k) + "_" + std::to_string(m));
    }
    for (int n = 0; n < lay.n_count; ++n) {
      conic::LinExpr link;
      link.add(lay.pbar_r(k, n), 1.0);
      link.add(lay.sigma_r(k, n), -ctx.power_budget_w);
      prob.ineq.push_back(std::move(link));
      prob.ineq_names.push_back("link_r_" + std::to_string(k) + "_" + std::to_string(n));
    }
  }

  // DC Taylor cuts: sigma0^2 + sigma (1 - 2 sigma0) <= slack.
  for (int k = 0; k < lay.k_count; ++k) {
    for (int n = 0; n < lay.n_count; ++n) {
      const Real s0 = sigma_r_lin(k, n);
      conic::LinExpr cut(s0 * s0);
      cut.add(lay.sigma_r(k, n), 1.0 - 2.0 * s0);
      cut.add(lay.alpha(k, n), -1.0);
      prob.ineq.push_back(std::move(cut));
      prob.ineq_names.push_back("dc_cut_r_" + std::to_string(k) + "_" + std::to_string(n));
    }
    for (int m = 0; m < lay.m_count; ++m) {
      const Real s0 = sigma_c_lin(k, m);
      conic::LinExpr cut(s0 * s0);
      cut.add(lay.sigma_c(k, m), 1.0 - 2.0 * s0);
      cut.add(lay.delta(k, m), -1.0);
      prob.ineq.push_back(std::move(cut));
      prob.ineq_names.push_back("dc_cut_c_" + std::to_string(k) + "_" + std::to_string(m));
    }
  }

  // Equality-feasible interior start; phase-I repairs the cones if needed.
  prob.start = VecX::Zero(prob.num_vars);
  const Real share = 1.0 / static_cast<Real>(lay.m_count + lay.n_count);
  const Real p0 = ctx.power_budget_w /
                  (2.0 * static_cast<Real>(lay.k_count * (lay.m_count + lay.n_count)));
  for (int k = 0; k < lay.k_count; ++k) {
    for (int m = 0; m < lay.m_count; ++m) {
      prob.start(lay.sigma_c(k, m)) = share;
      prob.start(lay.pbar_c(k, m)) = p0;
      prob.start(lay.delta(k, m)) = 0.5;
    }
    for (int n = 0; n < lay.n_count; ++n) {
      prob.start(lay.sigma_r(k, n)) = share;
      prob.start(lay.pbar_r(k, n)) = p0;
      prob.start(lay.alpha(k, n)) = 0.5;
    }
  }
  return prob;
}

bool feasibility_probe(const AllocationContext& ctx, const conic::Settings& settings) {
  // Detection-only probe: does any power split within the budget satisfy the
  // CRB cones? The sigma variables never appear there.
  conic::Problem prob;
  const int k_count = ctx.num_subcarriers;
  const int n_count = ctx.num_targets;
  std::vector<std::vector<int>> vars(k_count, std::vector<int>(n_count));
  for (int k = 0; k < k_count; ++k)
    for (int n = 0; n < n_count; ++n)
      vars[k][n] =
          prob.add_variable("p_" + std::to_string(k) + "_" + std::to_string(n), 0.0);
  conic::LinExpr power(-ctx.power_budget_w);
  for (int k = 0; k < k_count; ++k)
    for (int n = 0; n < n_count; ++n) power.add(vars[k][n], 1.0);
  prob.ineq.push_back(std::move(power));
  prob.ineq_names.push_back("total_power");
  append_crb_cones(ctx, prob, vars);
  prob.start = VecX::Constant(prob.num_vars,
                              ctx.power_budget_w / (2.0 * static_cast<Real>(prob.num_vars)));
  const conic::Solution sol = conic::phase1_feasibility(prob, settings);
  return sol.status == conic::SolveStatus::optimal;
}

Allocation algorithm1(const AllocationContext& ctx, const PenaltySchedule& schedule,
                      const conic::Settings& settings, Algorithm1Trace* trace) {
  if (!feasibility_probe(ctx, settings))
    throw InfeasibleError("allocation: CRB bounds unreachable even with all power on detection");

  const Layout lay{ctx.num_subcarriers, ctx.num_users, ctx.num_targets};
  const Real share = 1.0 / static_cast<Real>(lay.m_count + lay.n_count);
  MatX sigma_c_lin = MatX::Constant(lay.k_count, lay.m_count, share);
  MatX sigma_r_lin = MatX::Constant(lay.k_count, lay.n_count, share);

  Real beta = schedule.beta0;
  Real prev_rate = std::numeric_limits<Real>::quiet_NaN();
  Allocation relaxed;
  VecX warm;

  for (int j = 0; j < schedule.max_outer; ++j) {
    conic::Problem prob = build_subproblem(ctx, sigma_c_lin, sigma_r_lin, beta);
    if (warm.size() == prob.start.size()) prob.start = warm;
    conic::Solution sol = conic::solve(prob, settings);
    if (sol.status == conic::SolveStatus::infeasible)
      throw InfeasibleError("allocation subproblem infeasible: " + sol.message);

    // Clamp into the interior so the next warm start survives the bounds check.
    warm = sol.x;
    for (int i = 0; i < prob.num_vars; ++i) {
      const Real lo = prob.lower(i);
      const Real hi = prob.upper(i);
      if (std::isfinite(hi))
        warm(i) = std::clamp(warm(i), lo + 1e-12 * (hi - lo), hi - 1e-12 * (hi - lo));
      else
        warm(i) = std::max(warm(i), lo + 1e-12);
    }

    relaxed = extract(ctx, lay, sol.x);
    if (trace) {
      trace->rate.push_back(relaxed.rate);
      trace->violation.push_back(relaxed.violation);
      trace->beta.push_back(beta);
    }

    sigma_c_lin = relaxed.sigma_c;
    sigma_r_lin = relaxed.sigma_r;
    const bool saturated = beta >= schedule.beta_max;
    beta = std::min(schedule.gamma * beta, schedule.beta_max);

    // The rate plateaus long before the penalty finishes binarizing, so the
    // plateau alone is not a safe exit while sigma is still fractional.
    if (j > 0 && std::abs(relaxed.rate - prev_rate) <= schedule.epsilon &&
        (relaxed.violation <= 1e-4 || saturated))
      break;
    prev_rate = relaxed.rate;
  }

  if (trace) trace->relaxed = relaxed;

  // Binary recovery: argmax rounding, a feasibility repair that promotes the
  // subcarriers with the largest relaxed detection share, then deterministic
  // one-flip improvement against the exact restored rate.
  std::vector<SubcarrierOwner> owner = argmax_owners(ctx, relaxed);
  auto restored = solve_power_for_owners(ctx, owner, settings);
  if (!restored) {
    std::vector<int> order(ctx.num_subcarriers);
    for (int k = 0; k < ctx.num_subcarriers; ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return relaxed.sigma_r.row(a).sum() > relaxed.sigma_r.row(b).sum();
    });
    for (int k : order) {
      if (restored) break;
      if (!owner[k].is_comm) continue;
      int best_np = 0;
      relaxed.sigma_r.row(k).maxCoeff(&best_np);
      owner[k] = {false, best_np};
      restored = solve_power_for_owners(ctx, owner, settings);
    }
  }
  if (!restored)
    throw NumericalError("allocation: no feasible binary assignment found from the relaxed "
                         "solution, although the all-detection probe passed");

  Allocation binary = improve_owners(ctx, owner, *restored, settings);
  binary.penalty_converged = relaxed.violation <= 1e-4;
  return binary;
}


Allocation round_and_restore(const AllocationContext& ctx, const Allocation& relaxed,
                             const conic::Settings& settings) {
  const std::vector<SubcarrierOwner> owner = argmax_owners(ctx, relaxed);
  auto restored = solve_power_for_owners(ctx, owner, settings);
  if (!restored) {
    std::string names;
    for (int n = 0; n < ctx.num_targets; ++n)
      names += "crb_target" + std::to_string(n) + " ";
    throw NumericalError(
        "round_and_restore: rounded assignment infeasible for the CRB bounds; "
        "constraint set: " + names + "total_power");
  }
  return *restored;
}

Real dc_violation(const MatX& sigma_c, const MatX& sigma_r) {
  return (sigma_c.array() * (1.0 - sigma_c.array())).sum() +
         (sigma_r.array() * (1.0 - sigma_r.array())).sum();
}

Real allocation_rate(const AllocationContext& ctx, const Allocation& a) {
  Real rate = 0;
  for (int k = 0; k < ctx.num_subcarriers; ++k)
    for (int m = 0; m < ctx.num_users; ++m)
      rate += conic::perspective_rate(a.sigma_c(k, m), a.pbar_c(k, m), ctx.comm_gain(k, m));
  return rate;
}

Real penalized_objective(const AllocationContext& ctx, const Allocation& a, Real beta) {
  return allocation_rate(ctx, a) - beta * dc_violation(a.sigma_c, a.sigma_r);
}

bool verify_allocation(const FimBlocks& blocks, const Allocation& a,
                       const std::vector<int>& mask, Real eta_d, Real eta_v, Real slack) {
  const std::vector<CrbPair> crb = crb_matrices(blocks, a.pbar_r, mask);
  for (const auto& c : crb) {
    if (c.location(0, 0) > eta_d + slack || c.location(1, 1) > eta_d + slack) return false;
    if (c.velocity(0, 0) > eta_v + slack || c.velocity(1, 1) > eta_v + slack) return false;
  }
  return true;
}

}  // namespace dfrc
