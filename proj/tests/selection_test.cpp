#include <doctest.h>

#include <cmath>

#include "dfrc/selection.hpp"
#include "test_helpers.hpp"

using namespace dfrc;

namespace {

Mat2 random_psd(std::mt19937_64& rng, Real scale = 1.0) {
  std::normal_distribution<Real> gauss(0.0, 1.0);
  Mat2 a;
  a << gauss(rng), gauss(rng), gauss(rng), gauss(rng);
  Mat2 m = scale * (a * a.transpose());
  m += 0.05 * scale * Mat2::Identity();
  return m;
}

// Instance assembled directly from 2x2 blocks (one target).
SelectionInstance instance_from_blocks(const std::vector<Mat2>& bd,
                                       const std::vector<Mat2>& bv, int cardinality,
                                       Real eta_fixed) {
  const int rx = static_cast<int>(bd.size());
  SelectionInstance inst;
  inst.num_receivers = rx;
  inst.num_targets = 1;
  inst.cardinality = cardinality;
  inst.eta_fixed = eta_fixed;
  inst.b_d = bd;
  inst.b_v = bv;
  inst.q_d.resize(1);
  inst.q_v.resize(1);
  inst.p_d1 = {VecX(rx)};
  inst.p_d2 = {VecX(rx)};
  inst.p_v1 = {VecX(rx)};
  inst.p_v2 = {VecX(rx)};
  inst.q_d[0].resize(rx, rx);
  inst.q_v[0].resize(rx, rx);
  for (int r = 0; r < rx; ++r) {
    inst.p_d1[0](r) = bd[r](1, 1);
    inst.p_d2[0](r) = bd[r](0, 0);
    inst.p_v1[0](r) = bv[r](1, 1);
    inst.p_v2[0](r) = bv[r](0, 0);
    for (int rp = 0; rp < rx; ++rp) {
      inst.q_d[0](r, rp) = bd[r](0, 0) * bd[rp](1, 1) - bd[r](0, 1) * bd[rp](1, 0);
      inst.q_v[0](r, rp) = bv[r](0, 0) * bv[rp](1, 1) - bv[r](0, 1) * bv[rp](1, 0);
    }
  }
  return inst;
}

SelectionInstance random_instance(std::mt19937_64& rng, int rx, int cardinality,
                                  Real eta_fixed = 1e9) {
  std::vector<Mat2> bd, bv;
  for (int r = 0; r < rx; ++r) {
    bd.push_back(random_psd(rng));
    bv.push_back(random_psd(rng, 4.0));
  }
  return instance_from_blocks(bd, bv, cardinality, eta_fixed);
}

}  // namespace

TEST_CASE("rational CRB reproduces the 4/11 worked example") {
  Mat2 b1, b2;
  b1 << 2, 0, 0, 1;
  b2 << 1, 1, 1, 3;
  const auto inst = instance_from_blocks({b1, b2}, {b1, b2}, 2, 1e9);
  VecX s(2);
  s << 1, 1;
  CHECK(rational_crb_target(inst, 0, s, CrbKind::location, 1) ==
        doctest::Approx(4.0 / 11.0).epsilon(1e-15));
  // Direct 2x2 inversion of B1 + B2 = [[3,1],[1,4]].
  Mat2 sum = b1 + b2;
  CHECK(rational_crb_target(inst, 0, s, CrbKind::location, 1) ==
        doctest::Approx(sum.inverse()(0, 0)).epsilon(1e-15));
}

TEST_CASE("single receiver reduces to the plain inverse") {
  auto rng = testing::rng(51);
  const auto inst = random_instance(rng, 3, 1);
  for (int r = 0; r < 3; ++r) {
    VecX s = VecX::Zero(3);
    s(r) = 1.0;
    const Mat2 inv = inst.block_d(0, r).inverse();
    CHECK(rational_crb_target(inst, 0, s, CrbKind::location, 1) ==
          doctest::Approx(inv(0, 0)).epsilon(1e-12));
    CHECK(rational_crb_target(inst, 0, s, CrbKind::location, 2) ==
          doctest::Approx(inv(1, 1)).epsilon(1e-12));
  }
}

TEST_CASE("rational path equals matrix inversion on 500 fuzzed instances") {
  auto rng = testing::rng(53);
  std::uniform_int_distribution<int> rx_dist(2, 6);
  std::uniform_real_distribution<Real> coin(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int rx = rx_dist(rng);
    const auto inst = random_instance(rng, rx, rx);
    VecX s(rx);
    bool any = false;
    for (int r = 0; r < rx; ++r) {
      s(r) = coin(rng) < 0.5 ? 0.0 : 1.0;
      any = any || s(r) > 0;
    }
    if (!any) s(0) = 1.0;
    Mat2 sum_d = Mat2::Zero(), sum_v = Mat2::Zero();
    for (int r = 0; r < rx; ++r) {
      sum_d += s(r) * inst.block_d(0, r);
      sum_v += s(r) * inst.block_v(0, r);
    }
    const Mat2 inv_d = sum_d.inverse();
    const Mat2 inv_v = sum_v.inverse();
    CHECK(rational_crb_target(inst, 0, s, CrbKind::location, 1) ==
          doctest::Approx(inv_d(0, 0)).epsilon(1e-12));
    CHECK(rational_crb_target(inst, 0, s, CrbKind::location, 2) ==
          doctest::Approx(inv_d(1, 1)).epsilon(1e-12));
    CHECK(rational_crb_target(inst, 0, s, CrbKind::velocity, 1) ==
          doctest::Approx(inv_v(0, 0)).epsilon(1e-12));
    CHECK(rational_crb_target(inst, 0, s, CrbKind::velocity, 2) ==
          doctest::Approx(inv_v(1, 1)).epsilon(1e-12));
  }
}

TEST_CASE("lemma identity holds for arbitrary real weights") {
  auto rng = testing::rng(59);
  std::uniform_real_distribution<Real> u(0.05, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(rng, 5, 3);
    VecX a(5);
    for (int r = 0; r < 5; ++r) a(r) = u(rng);
    Mat2 sum = Mat2::Zero();
    for (int r = 0; r < 5; ++r) sum += a(r) * inst.block_d(0, r);
    const Mat2 inv = sum.inverse();
    const Real rel1 =
        std::abs(rational_crb_target(inst, 0, a, CrbKind::location, 1) - inv(0, 0)) /
        std::abs(inv(0, 0));
    const Real rel2 =
        std::abs(rational_crb_target(inst, 0, a, CrbKind::location, 2) - inv(1, 1)) /
        std::abs(inv(1, 1));
    CHECK(rel1 <= 1e-12);
    CHECK(rel2 <= 1e-12);
  }
}

TEST_CASE("singular subset raises") {
  Mat2 rank1;
  rank1 << 1, 1, 1, 1;  // singular
  const auto inst = instance_from_blocks({rank1, rank1}, {rank1, rank1}, 1, 1e9);
  VecX s(2);
  s << 1, 0;
  CHECK_THROWS_AS(rational_crb_target(inst, 0, s, CrbKind::location, 1), NumericalError);
}

TEST_CASE("convexified constraint") {
  auto rng = testing::rng(61);

  SUBCASE("shift makes the quadratic part PSD") {
    const auto inst = random_instance(rng, 4, 2);
    const auto c = convexify(inst.q_d[0], inst.p_d1[0], 0.7, 2);
    Eigen::SelfAdjointEigenSolver<MatX> eig(c.z_shift);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }

  SUBCASE("verdict-equivalent to the rational constraint on every binary mask") {
    for (int trial = 0; trial < 30; ++trial) {
      const int rx = 3 + trial % 3;
      const int nr = 2;
      const auto inst = random_instance(rng, rx, nr);
      const VecX all = VecX::Ones(rx);
      const Real eta = 1.3 * rational_crb_target(inst, 0, all, CrbKind::location, 1);
      const auto c = convexify(inst.q_d[0], inst.p_d1[0], eta, nr);

      std::vector<int> idx(nr);
      for (int i = 0; i < nr; ++i) idx[i] = i;
      // Enumerate all C(rx, nr) masks.
      while (true) {
        VecX s = VecX::Zero(rx);
        for (int i : idx) s(i) = 1.0;
        const bool rational_ok =
            rational_crb_target(inst, 0, s, CrbKind::location, 1) <= eta;
        const bool convex_ok = c.evaluate(s) <= 1e-9 * inst.q_d[0].cwiseAbs().maxCoeff();
        CHECK(rational_ok == convex_ok);
        int i = nr - 1;
        while (i >= 0 && idx[i] == rx - nr + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int j = i + 1; j < nr; ++j) idx[j] = idx[j - 1] + 1;
      }
    }
  }
}

TEST_CASE("feasible_mask basics") {
  auto rng = testing::rng(67);
  const auto inst = random_instance(rng, 4, 2);
  SUBCASE("huge bounds admit the lexicographically first subset") {
    const auto m = feasible_mask(inst, 1e12);
    REQUIRE(m.has_value());
    CHECK(m->s == std::vector<int>{1, 1, 0, 0});
  }
  SUBCASE("below the all-receivers bound nothing is feasible") {
    const VecX all = VecX::Ones(4);
    const Real floor_eta =
        std::max(rational_crb_target(inst, 0, all, CrbKind::location, 1),
                 rational_crb_target(inst, 0, all, CrbKind::location, 2));
    CHECK_FALSE(feasible_mask(inst, 0.5 * floor_eta).has_value());
  }
}

TEST_CASE("feasibility verdict matches the convexified certificate per subset") {
  auto rng = testing::rng(71);
  const int rx = 5, nr = 3;
  const auto inst = random_instance(rng, rx, nr);
  const VecX all = VecX::Ones(rx);
  const Real eta = 1.2 * rational_crb_target(inst, 0, all, CrbKind::location, 1);
  const auto c1 = convexify(inst.q_d[0], inst.p_d1[0], eta, nr);
  const auto c2 = convexify(inst.q_d[0], inst.p_d2[0], eta, nr);

  std::vector<int> idx(nr);
  for (int i = 0; i < nr; ++i) idx[i] = i;
  while (true) {
    VecX s = VecX::Zero(rx);
    for (int i : idx) s(i) = 1.0;
    const bool rational_ok =
        rational_crb_target(inst, 0, s, CrbKind::location, 1) <= eta &&
        rational_crb_target(inst, 0, s, CrbKind::location, 2) <= eta;
    const Real tol = 1e-9 * inst.q_d[0].cwiseAbs().maxCoeff();
    const bool convex_ok = c1.evaluate(s) <= tol && c2.evaluate(s) <= tol;
    CHECK(rational_ok == convex_ok);
    int i = nr - 1;
    while (i >= 0 && idx[i] == rx - nr + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < nr; ++j) idx[j] = idx[j - 1] + 1;
  }
}

TEST_CASE("algorithm2 bisection") {
  auto rng = testing::rng(73);

  SUBCASE("iteration count is the bracket log") {
    // Construct an instance whose optimum lies strictly inside [1, 2].
    SelectionInstance inst = random_instance(rng, 4, 2);
    const auto best = enumerate_optimum(inst);
    REQUIRE(best.has_value());
    // Rescale the blocks so the optimum falls at ~1.4.
    const Real factor = best->first / 1.4;
    for (auto& b : inst.b_d) b *= factor;
    for (auto& q : inst.q_d) q *= factor * factor;
    for (auto& p : inst.p_d1) p *= factor;
    for (auto& p : inst.p_d2) p *= factor;
    const BisectionResult res = algorithm2(inst, 1.0, 2.0, 0.25);
    CHECK(res.iterations == 2);
    CHECK(res.eta - 1.4 <= 0.25 + 1e-9);
    CHECK(res.eta >= 1.4 - 1e-6);
  }

  SUBCASE("result is within eps of the enumeration optimum") {
    for (int trial = 0; trial < 20; ++trial) {
      const int rx = 4 + trial % 5;  // up to 8
      const int nr = 2 + trial % 3;
      const auto inst = random_instance(rng, rx, std::min(nr, rx));
      const auto best = enumerate_optimum(inst);
      REQUIRE(best.has_value());
      const auto bracket = initial_bracket(inst);
      const Real eps = 1e-3;
      const BisectionResult res = algorithm2(inst, bracket.first, bracket.second, eps);
      CHECK(res.eta >= best->first - 1e-12);
      CHECK(res.eta - best->first <= eps + 1e-12);
      // The witness mask achieves the bound it claims.
      VecX s = VecX::Zero(rx);
      for (int r = 0; r < rx; ++r) s(r) = res.mask.s[r];
      CHECK(rational_crb(inst, s, CrbKind::location, 1) <= res.eta + 1e-12);
      CHECK(rational_crb(inst, s, CrbKind::location, 2) <= res.eta + 1e-12);
    }
  }

  SUBCASE("feasible lower end rejects the bracket") {
    const auto inst = random_instance(rng, 4, 2);
    CHECK_THROWS_AS(algorithm2(inst, 1e12, 2e12, 1e-3), InfeasibleError);
  }
}

TEST_CASE("velocity variant mirrors the location search") {
  auto rng = testing::rng(79);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = random_instance(rng, 6, 3);
    const auto best = enumerate_optimum(inst, SelectionObjective::minimize_v);
    REQUIRE(best.has_value());
    const auto bracket = initial_bracket(inst, SelectionObjective::minimize_v);
    const BisectionResult res =
        select_velocity_variant(inst, bracket.first, bracket.second, 1e-3);
    CHECK(res.eta >= best->first - 1e-12);
    CHECK(res.eta - best->first <= 1e-3 + 1e-12);
  }
  SUBCASE("bracket arithmetic is unchanged") {
    SelectionInstance inst = random_instance(rng, 4, 2);
    const auto best = enumerate_optimum(inst, SelectionObjective::minimize_v);
    REQUIRE(best.has_value());
    const Real factor = best->first / 1.4;
    for (auto& b : inst.b_v) b *= factor;
    for (auto& q : inst.q_v) q *= factor * factor;
    for (auto& p : inst.p_v1) p *= factor;
    for (auto& p : inst.p_v2) p *= factor;
    const BisectionResult res = select_velocity_variant(inst, 1.0, 2.0, 0.25);
    CHECK(res.iterations == 2);
  }
}

TEST_CASE("achievable bound is monotone in the cardinality") {
  auto rng = testing::rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    SelectionInstance inst = random_instance(rng, 6, 1);
    Real prev = std::numeric_limits<Real>::infinity();
    for (int nr = 1; nr <= 6; ++nr) {
      inst.cardinality = nr;
      const auto best = enumerate_optimum(inst);
      REQUIRE(best.has_value());
      CHECK(best->first <= prev + 1e-12);
      prev = best->first;
    }
  }
}

TEST_CASE("fixed velocity bound can rule out every subset") {
  auto rng = testing::rng(89);
  SelectionInstance inst = random_instance(rng, 4, 2, 1e-12);  // impossible eta_v
  CHECK_THROWS_AS(initial_bracket(inst), InfeasibleError);
}
