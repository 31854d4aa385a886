#include <doctest.h>

#include <cmath>

#include "dfrc/allocation.hpp"
#include "test_helpers.hpp"

using namespace dfrc;

namespace {

CovarianceSet quick_cov(const Scenario& sc) {
  DesignOptions opts;
  opts.tol = 1e-9;
  opts.max_iter = 400;
  return design_covariance_set(sc, false, opts);
}

// K=6 toy: one user, one target, two receivers.
Scenario toy_scenario() {
  Scenario sc = testing::reference_scenario(6, 8, 8);
  sc.target_positions = {sc.target_positions[0]};
  sc.target_velocities = {Vec2(20.0, 0.0)};
  sc.detection_subareas = {{0.0, 30.0}};
  sc.user_positions = {sc.user_positions[0]};
  sc.receiver_positions = {sc.receiver_positions[0], sc.receiver_positions[1]};
  sc.rcs_per_receiver = {0.095, 0.092};
  sc.total_power_w = 0.5;
  return sc;
}

struct Toy {
  Scenario sc;
  CovarianceSet cov;
  FimBlocks blocks;
  AllocationContext ctx;
};

// eta factors are relative to the all-power-on-detection bound, so the CRB
// constraints bind without being infeasible.
Toy make_toy(Real eta_d_factor, Real eta_v_factor) {
  Toy toy{toy_scenario(), {}, {}, {}};
  toy.cov = quick_cov(toy.sc);
  toy.blocks = info_blocks(toy.sc, toy.cov);
  const MatX all_power =
      MatX::Constant(6, 1, toy.sc.total_power_w / 6.0);
  const auto bound = crb_matrices(toy.blocks, all_power, {1, 1});
  const Real eta_d =
      eta_d_factor * std::max(bound[0].location(0, 0), bound[0].location(1, 1));
  const Real eta_v =
      eta_v_factor * std::max(bound[0].velocity(0, 0), bound[0].velocity(1, 1));
  toy.ctx = make_allocation_context(toy.sc, toy.blocks, {1, 1}, eta_d, eta_v);
  return toy;
}

// Exhaustive oracle: every subcarrier assignment, each with a convex
// power-only solve built from scratch here.
Real exhaustive_best_rate(const AllocationContext& ctx) {
  const int k_count = ctx.num_subcarriers;
  Real best = -1;
  for (int bits = 0; bits < (1 << k_count); ++bits) {
    conic::Problem prob;
    for (int k = 0; k < k_count; ++k) prob.add_variable("p" + std::to_string(k), 0.0);
    conic::LinExpr budget(-ctx.power_budget_w);
    for (int k = 0; k < k_count; ++k) budget.add(k, 1.0);
    prob.ineq.push_back(budget);
    for (int k = 0; k < k_count; ++k)
      if ((bits & (1 << k)) == 0) prob.rates.push_back({-1, k, ctx.comm_gain(k, 0), 1.0});
    const auto& c = ctx.coeff[0];
    struct Spec {
      const MatX* a;
      const MatX* b;
      const MatX* d;
      Real eta;
    };
    const Spec specs[4] = {{&c.d11, &c.d12, &c.d22, ctx.eta_d},
                           {&c.d22, &c.d12, &c.d11, ctx.eta_d},
                           {&c.v11, &c.v12, &c.v22, ctx.eta_v},
                           {&c.v22, &c.v12, &c.v11, ctx.eta_v}};
    for (const auto& s : specs) {
      conic::RotatedCone cone;
      cone.v.constant = -1.0;
      for (int k = 0; k < k_count; ++k) {
        if ((bits & (1 << k)) == 0) continue;  // comm subcarrier
        cone.u.add(k, (*s.d)(k, 0));
        cone.w.add(k, std::sqrt(s.eta) * (*s.b)(k, 0));
        cone.v.add(k, s.eta * (*s.a)(k, 0));
      }
      prob.cones.push_back(std::move(cone));
    }
    prob.start = VecX::Constant(k_count, ctx.power_budget_w / (2.0 * k_count));
    const conic::Solution sol = conic::solve(prob);
    if (sol.status != conic::SolveStatus::optimal) continue;
    best = std::max(best, sol.objective);
  }
  return best;
}

}  // namespace

TEST_CASE("subproblem assembly matches the hand count for K=4, M=1, N=1") {
  Toy toy = make_toy(2.0, 2.0);
  Scenario small = toy.sc;
  small.num_subcarriers = 4;
  const CovarianceSet cov = quick_cov(small);
  const FimBlocks blocks = info_blocks(small, cov);
  const AllocationContext ctx =
      make_allocation_context(small, blocks, {1, 1}, toy.ctx.eta_d, toy.ctx.eta_v);
  const MatX half_c = MatX::Constant(4, 1, 0.5);
  const MatX half_r = MatX::Constant(4, 1, 0.5);
  const conic::Problem prob = build_subproblem(ctx, half_c, half_r, 1.0);

  CHECK(prob.cones.size() == 4);      // four CRB cones for the single target
  CHECK(prob.eq.size() == 4);         // one owner row per subcarrier
  // Power budget, one ownership link and one DC cut per (k, owner).
  CHECK(prob.ineq.size() == 1 + 8 + 8);
  CHECK(prob.num_vars == 4 * 3 * 2);  // sigma, pbar, slack per (k, owner)

  SUBCASE("taylor cut at 0.5 pins the slack at 0.25") {
    // Cut rows read sigma0^2 + sigma (1 - 2 sigma0) - slack <= 0.
    size_t first_cut = 0;
    for (size_t i = 0; i < prob.ineq_names.size(); ++i)
      if (prob.ineq_names[i].rfind("dc_cut", 0) == 0) {
        first_cut = i;
        break;
      }
    const auto& cut = prob.ineq[first_cut];
    CHECK(cut.constant == doctest::Approx(0.25));
    for (const auto& [var, coef] : cut.terms) {
      if (var < 8) CHECK(coef == doctest::Approx(0.0));  // sigma coefficient vanishes
    }
  }
}

TEST_CASE("no targets reduces to pure water-filling for the user") {
  Scenario sc = toy_scenario();
  sc.target_positions.clear();
  sc.target_velocities.clear();
  sc.detection_subareas.clear();
  const CovarianceSet cov = quick_cov(sc);
  const FimBlocks blocks = info_blocks(sc, cov);
  const AllocationContext ctx = make_allocation_context(sc, blocks, {1, 1}, 1.0, 1.0);
  const Allocation alloc = algorithm1(ctx);
  CHECK(alloc.binary);
  for (int k = 0; k < 6; ++k) CHECK(alloc.sigma_c(k, 0) == 1.0);

  // Water-filling with equal gains spreads the power evenly.
  Real expected = 0;
  for (int k = 0; k < 6; ++k)
    expected += std::log2(1.0 + ctx.comm_gain(k, 0) * sc.total_power_w / 6.0);
  CHECK(alloc.rate == doctest::Approx(expected).epsilon(1e-5));
}

TEST_CASE("loose CRB bounds give everything to communication") {
  Toy toy = make_toy(1e9, 1e9);
  const Allocation alloc = algorithm1(toy.ctx);
  CHECK(alloc.binary);
  CHECK(alloc.pbar_r.sum() <= 1e-6 * toy.sc.total_power_w);
  Real expected = 0;
  for (int k = 0; k < 6; ++k)
    expected += std::log2(1.0 + toy.ctx.comm_gain(k, 0) * toy.sc.total_power_w / 6.0);
  CHECK(alloc.rate == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("algorithm1 reaches the exhaustive-assignment optimum on the toy") {
  Toy toy = make_toy(1.8, 1.6);
  Algorithm1Trace trace;
  const Allocation alloc = algorithm1(toy.ctx, {}, {}, &trace);
  CHECK(alloc.binary);
  CHECK(trace.relaxed.violation < 1e-4);

  const Real best = exhaustive_best_rate(toy.ctx);
  REQUIRE(best > 0);
  CHECK(alloc.rate >= best * (1.0 - 1e-3));
  CHECK(alloc.rate <= best * (1.0 + 1e-6));  // binary solutions cannot beat the oracle

  SUBCASE("the returned allocation satisfies the original constraints") {
    CHECK(verify_allocation(toy.blocks, alloc, {1, 1}, toy.ctx.eta_d, toy.ctx.eta_v));
    CHECK(alloc.pbar_c.sum() + alloc.pbar_r.sum() <= toy.sc.total_power_w + 1e-9);
    for (int k = 0; k < 6; ++k)
      CHECK(alloc.sigma_c.row(k).sum() + alloc.sigma_r.row(k).sum() ==
            doctest::Approx(1.0));
  }
}

TEST_CASE("violation decays once the penalty saturates") {
  Toy toy = make_toy(1.8, 1.6);
  PenaltySchedule schedule;
  schedule.epsilon = 0.0;  // run the full schedule
  schedule.max_outer = 16;
  Algorithm1Trace trace;
  algorithm1(toy.ctx, schedule, {}, &trace);
  REQUIRE(trace.violation.size() >= 5);
  for (size_t j = trace.violation.size() - 4; j < trace.violation.size(); ++j)
    CHECK(trace.violation[j] <= trace.violation[j - 1] + 1e-9);
  CHECK(trace.violation.back() < 1e-4);
}

TEST_CASE("round_and_restore") {
  Toy toy = make_toy(1.8, 1.6);

  SUBCASE("already-binary input is unchanged") {
    const Allocation alloc = algorithm1(toy.ctx);
    const Allocation again = round_and_restore(toy.ctx, alloc);
    CHECK((again.sigma_c - alloc.sigma_c).norm() == 0.0);
    CHECK((again.sigma_r - alloc.sigma_r).norm() == 0.0);
    CHECK(again.rate == doctest::Approx(alloc.rate).epsilon(1e-9));
  }

  SUBCASE("argmax picks the heavier owner") {
    Allocation relaxed;
    relaxed.sigma_c = MatX::Constant(6, 1, 0.9);
    relaxed.sigma_r = MatX::Constant(6, 1, 0.1);
    relaxed.sigma_r(2, 0) = 0.95;  // except subcarrier 2
    relaxed.sigma_c(2, 0) = 0.05;
    relaxed.pbar_c = MatX::Constant(6, 1, 0.05);
    relaxed.pbar_r = MatX::Constant(6, 1, 0.02);
    Toy loose = make_toy(4.0, 3.0);
    const Allocation rounded = round_and_restore(loose.ctx, relaxed);
    CHECK(rounded.sigma_r(2, 0) == 1.0);
    for (int k = 0; k < 6; ++k)
      if (k != 2) CHECK(rounded.sigma_c(k, 0) == 1.0);
  }

  SUBCASE("restoration keeps most of the relaxed rate") {
    Algorithm1Trace trace;
    algorithm1(toy.ctx, {}, {}, &trace);
    const Allocation rounded = round_and_restore(toy.ctx, trace.relaxed);
    CHECK(rounded.rate >= trace.relaxed.rate * 0.95);
  }

  SUBCASE("infeasible rounding is reported with the constraint set") {
    // Force an impossible rounding: relaxed point gives everything to comm
    // while the CRB bounds are tight.
    Toy tight = make_toy(1.05, 1.05);
    Allocation relaxed;
    relaxed.sigma_c = MatX::Constant(6, 1, 0.9);
    relaxed.sigma_r = MatX::Constant(6, 1, 0.1);
    relaxed.pbar_c = MatX::Constant(6, 1, 0.08);
    relaxed.pbar_r = MatX::Constant(6, 1, 0.0);
    CHECK_THROWS_WITH_AS(round_and_restore(tight.ctx, relaxed),
                         doctest::Contains("crb_"), NumericalError);
  }
}

TEST_CASE("relaxed optimum with no penalty upper-bounds every binary rate") {
  Toy toy = make_toy(1e9, 1e9);  // CRB constraints inactive
  const conic::Problem relaxed_prob = build_subproblem(
      toy.ctx, MatX::Constant(6, 1, 0.5), MatX::Constant(6, 1, 0.5), 0.0);
  const conic::Solution relaxed = conic::solve(relaxed_prob);
  REQUIRE(relaxed.status == conic::SolveStatus::optimal);

  const Real best_binary = exhaustive_best_rate(toy.ctx);
  // The relaxed objective includes no penalty, so it dominates.
  CHECK(relaxed.objective >= best_binary - 1e-6);
}

TEST_CASE("rate grows with a looser location bound") {
  Real prev = -1;
  for (Real factor : {1.1, 1.5, 2.5, 5.0}) {
    Toy toy = make_toy(factor, 2.0);
    const Allocation alloc = algorithm1(toy.ctx);
    CHECK(alloc.rate >= prev - 1e-6);
    prev = alloc.rate;
  }
}

TEST_CASE("penalized objective decreases in beta at a fixed point") {
  Toy toy = make_toy(1.8, 1.6);
  Allocation fixed;
  fixed.sigma_c = MatX::Constant(6, 1, 0.6);
  fixed.sigma_r = MatX::Constant(6, 1, 0.4);
  fixed.pbar_c = MatX::Constant(6, 1, 0.05);
  fixed.pbar_r = MatX::Constant(6, 1, 0.03);
  Real prev = std::numeric_limits<Real>::infinity();
  for (Real beta : {0.0, 0.1, 1.0, 10.0}) {
    const Real obj = penalized_objective(toy.ctx, fixed, beta);
    CHECK(obj < prev);
    prev = obj;
  }
}

TEST_CASE("unreachable CRB bounds are detected up front") {
  Toy toy = make_toy(0.5, 0.5);  // below the all-power bound
  CHECK_FALSE(feasibility_probe(toy.ctx));
  CHECK_THROWS_AS(algorithm1(toy.ctx), InfeasibleError);
}
