#include <doctest.h>

#include <cmath>

#include "dfrc/fim.hpp"
#include "test_helpers.hpp"

using namespace dfrc;

namespace {

CovarianceSet quick_cov(const Scenario& sc) {
  DesignOptions opts;
  opts.tol = 1e-9;
  opts.max_iter = 400;
  return design_covariance_set(sc, false, opts);
}

Scenario single_target_scenario(int subcarriers = 8, int symbols = 4) {
  Scenario sc = testing::reference_scenario(subcarriers, 8, symbols);
  sc.target_positions = {sc.target_positions[0]};
  sc.target_velocities = {Vec2(12.0, 7.0)};
  sc.detection_subareas = {{0.0, 30.0}};
  sc.receiver_positions = {sc.receiver_positions[0], sc.receiver_positions[1]};
  sc.rcs_per_receiver = {0.095, 0.092};
  return sc;
}

MatX uniform_weight(const Scenario& sc) {
  return MatX::Constant(sc.num_subcarriers, sc.num_targets(),
                        sc.total_power_w /
                            static_cast<Real>(sc.num_subcarriers * sc.num_targets()));
}

}  // namespace

TEST_CASE("info blocks: structure and trivial reductions") {
  Scenario sc = testing::reference_scenario(8, 8, 4);
  const CovarianceSet cov = quick_cov(sc);
  const FimBlocks blocks = info_blocks(sc, cov);

  SUBCASE("D and V are exactly symmetric") {
    for (int n = 0; n < 2; ++n)
      for (int r = 0; r < 4; ++r)
        for (int k = 0; k < 8; ++k)
          for (int np = 0; np < 2; ++np) {
            CHECK(blocks.location(n, r, k, np)(0, 1) == blocks.location(n, r, k, np)(1, 0));
            CHECK(blocks.velocity(n, r, k, np)(0, 1) == blocks.velocity(n, r, k, np)(1, 0));
          }
  }
  SUBCASE("V has no subcarrier dependence") {
    for (int n = 0; n < 2; ++n)
      for (int r = 0; r < 4; ++r)
        for (int np = 0; np < 2; ++np)
          for (int k = 1; k < 8; ++k)
            CHECK((blocks.velocity(n, r, k, np) - blocks.velocity(n, r, 0, np)).norm() == 0.0);
  }
  SUBCASE("velocity diagonal ratio equals the squared gradient ratio") {
    const PathGeometry g = geometry_partials(sc, 0, 1);
    const Mat2& v = blocks.velocity(0, 1, 3, 0);
    CHECK(v(0, 0) / v(1, 1) ==
          doctest::Approx(std::pow(g.doppler_grad_vel(0) / g.doppler_grad_vel(1), 2))
              .epsilon(1e-12));
  }
  SUBCASE("blocks scale linearly with |c|^2 via the RCS") {
    Scenario scaled = sc;
    for (auto& rcs : scaled.rcs_per_receiver) rcs *= 4.0;
    const FimBlocks big = info_blocks(scaled, cov);
    CHECK((big.location(0, 0, 2, 1) - 4.0 * blocks.location(0, 0, 2, 1)).norm() <
          1e-12 * big.location(0, 0, 2, 1).norm());
  }
  SUBCASE("zero velocity strips everything but the delay curvature") {
    Scenario still = sc;
    still.target_velocities = {Vec2(0, 0), Vec2(0, 0)};
    const FimBlocks quiet = info_blocks(still, cov);
    const PathGeometry g = geometry_partials(still, 0, 0);
    const Real loss = radar_pathloss(still, 0, 0);
    const Real pref = 8.0 * kPi * kPi * loss * loss / still.radar_noise_var;
    const int k = 5;
    const Real kw = (k + 1) * still.subcarrier_spacing_hz;  // literal convention
    const Real gain = quiet.beam_gain(0 * 2 + 1, k);
    const Mat2 expect = pref * gain * kw * kw * still.num_symbols *
                        (g.delay_grad * g.delay_grad.transpose());
    CHECK((quiet.location(0, 0, k, 1) - expect).norm() < 1e-12 * expect.norm());
  }
  SUBCASE("single-entry accessor agrees with the bulk build") {
    const auto [d, v] = info_block(sc, cov, 1, 2, 3, 0);
    CHECK((d - blocks.location(1, 2, 3, 0)).norm() <= 1e-14 * d.norm());
    CHECK((v - blocks.velocity(1, 2, 3, 0)).norm() <= 1e-14 * v.norm());
  }
}

TEST_CASE("crb matrices") {
  Scenario sc = single_target_scenario();
  const CovarianceSet cov = quick_cov(sc);
  const FimBlocks blocks = info_blocks(sc, cov);
  const MatX w = uniform_weight(sc);
  const std::vector<int> mask = {1, 1};

  SUBCASE("doubling the power halves every entry") {
    const auto base = crb_matrices(blocks, w, mask);
    const auto loud = crb_matrices(blocks, 2.0 * w, mask);
    CHECK((loud[0].location - 0.5 * base[0].location).norm() <
          1e-12 * base[0].location.norm());
    CHECK((loud[0].velocity - 0.5 * base[0].velocity).norm() <
          1e-12 * base[0].velocity.norm());
  }
  SUBCASE("all-zero mask is a singular-information error") {
    CHECK_THROWS_AS(crb_matrices(blocks, w, {0, 0}), NumericalError);
  }
  SUBCASE("zero detection power is a singular-information error") {
    CHECK_THROWS_AS(crb_matrices(blocks, MatX::Zero(w.rows(), w.cols()), mask),
                    NumericalError);
  }
  SUBCASE("matches a brute-force sum and Eigen inversion") {
    Mat2 fd = Mat2::Zero(), fv = Mat2::Zero();
    for (int r = 0; r < sc.num_receivers(); ++r)
      for (int k = 0; k < sc.num_subcarriers; ++k)
        for (int np = 0; np < sc.num_targets(); ++np) {
          const auto [d, v] = info_block(sc, cov, 0, r, k, np);
          fd += w(k, np) * d;
          fv += w(k, np) * v;
        }
    const Mat2 cd = fd.inverse();
    const Mat2 cvm = fv.inverse();
    const auto crb = crb_matrices(blocks, w, mask);
    CHECK((crb[0].location - cd).norm() < 1e-10 * cd.norm());
    CHECK((crb[0].velocity - cvm).norm() < 1e-10 * cvm.norm());
  }
}

TEST_CASE("activating a receiver never worsens the location diagonal") {
  Scenario sc = testing::reference_scenario(8, 8, 4);
  const CovarianceSet cov = quick_cov(sc);
  const FimBlocks blocks = info_blocks(sc, cov);
  const MatX w = uniform_weight(sc);

  std::vector<int> base = {1, 0, 1, 0};
  const auto before = crb_matrices(blocks, w, base);
  for (int r = 0; r < 4; ++r) {
    if (base[r] == 1) continue;
    std::vector<int> more = base;
    more[r] = 1;
    const auto after = crb_matrices(blocks, w, more);
    for (int n = 0; n < sc.num_targets(); ++n) {
      CHECK(after[n].location(0, 0) <= before[n].location(0, 0) + 1e-15);
      CHECK(after[n].location(1, 1) <= before[n].location(1, 1) + 1e-15);
    }
  }
}

TEST_CASE("velocity CRB is invariant to the subcarrier count at matched power") {
  Scenario sc32 = testing::reference_scenario(32, 8, 8);
  Scenario sc64 = testing::reference_scenario(64, 8, 8);
  const CovarianceSet cov32 = quick_cov(sc32);
  const CovarianceSet cov64 = quick_cov(sc64);
  const FimBlocks b32 = info_blocks(sc32, cov32);
  const FimBlocks b64 = info_blocks(sc64, cov64);

  // Arbitrary K=32 weights, split pairwise onto K=64 so per-beam sums match.
  MatX w32(32, 2);
  for (int k = 0; k < 32; ++k)
    for (int np = 0; np < 2; ++np) w32(k, np) = 0.01 + 0.002 * ((3 * k + np) % 7);
  MatX w64 = MatX::Zero(64, 2);
  for (int k = 0; k < 32; ++k)
    for (int np = 0; np < 2; ++np) {
      w64(2 * k, np) = 0.5 * w32(k, np);
      w64(2 * k + 1, np) = 0.5 * w32(k, np);
    }
  const std::vector<int> mask = {1, 1, 1, 1};
  const auto crb32 = crb_matrices(b32, w32, mask);
  const auto crb64 = crb_matrices(b64, w64, mask);
  for (int n = 0; n < 2; ++n) {
    CHECK((crb32[n].velocity - crb64[n].velocity).norm() <= 1e-9 * crb32[n].velocity.norm());
    // Location information grows with the squared subcarrier index.
    CHECK(crb64[n].location(0, 0) < crb32[n].location(0, 0));
    CHECK(crb64[n].location(1, 1) < crb32[n].location(1, 1));
  }
}

TEST_CASE("numerical FIM oracle") {
  Scenario sc = single_target_scenario(8, 4);
  const CovarianceSet cov = quick_cov(sc);
  const MatX w = uniform_weight(sc);
  const std::vector<int> mask = {1, 1};

  for (auto conv : {PhaseConvention::literal, PhaseConvention::physical}) {
    FimOptions opts;
    opts.convention = conv;
    const FimBlocks blocks = info_blocks(sc, cov, opts);
    const auto sums = information_sums(blocks, w, mask);

    const MatX f = fim_numerical(sc, w, cov, mask, {}, opts);
    REQUIRE(f.rows() == 4);

    const MatX d_block = f.block(0, 0, 2, 2);
    const MatX v_block = f.block(2, 2, 2, 2);
    CHECK((d_block - sums[0].first).norm() / sums[0].first.norm() < 1e-3);
    CHECK((v_block - sums[0].second).norm() / sums[0].second.norm() < 1e-3);

    // Cross-check at a second step size.
    FdSteps fine{2.5e-10, 0.125};
    const MatX f2 = fim_numerical(sc, w, cov, mask, fine, opts);
    CHECK((f2.block(0, 0, 2, 2) - sums[0].first).norm() / sums[0].first.norm() < 1e-3);

    // Symmetric PSD within tolerance.
    CHECK((f - f.transpose()).norm() < 1e-9 * f.norm());
    Eigen::SelfAdjointEigenSolver<MatX> eig(0.5 * (f + f.transpose()));
    CHECK(eig.eigenvalues().minCoeff() >= -1e-6 * eig.eigenvalues().maxCoeff());
  }
}

TEST_CASE("numerical FIM exposes weak cross-target coupling") {
  Scenario sc = testing::reference_scenario(16, 8, 8);
  sc.receiver_positions = {sc.receiver_positions[0], sc.receiver_positions[1]};
  sc.rcs_per_receiver = {0.095, 0.092};
  const CovarianceSet cov = quick_cov(sc);
  const MatX w = uniform_weight(sc);
  const std::vector<int> mask = {1, 1};

  const MatX f = fim_numerical(sc, w, cov, mask);
  REQUIRE(f.rows() == 8);
  const Real diag_scale = std::min(f.block(0, 0, 4, 4).norm(), f.block(4, 4, 4, 4).norm());
  const Real off = f.block(0, 4, 4, 4).norm();
  // Targets are ~180 m apart in different beams; the coupling block stays
  // well below the per-target information.
  CHECK(off < 0.15 * diag_scale);
}

TEST_CASE("numerical FIM guards its problem size") {
  Scenario sc = testing::reference_scenario(64, 32, 32);
  const CovarianceSet cov = quick_cov(sc);
  CHECK_THROWS_AS(fim_numerical(sc, uniform_weight(sc), cov, {1, 1, 1, 1}, {}, {}),
                  ConfigError);
}
