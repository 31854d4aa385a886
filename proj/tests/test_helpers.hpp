#pragma once

#include <random>

#include "dfrc/scenario.hpp"

namespace dfrc::testing {

/// Deployment used across the suites: BS at the origin, four receivers on a
/// 50 m circle (90-degree spacing, offset -15 degrees), two targets in the
/// [0,30] and [30,60] degree subareas, two users past the detection area.
inline Scenario reference_scenario(int subcarriers = 16, int antennas = 8, int symbols = 8) {
  Scenario sc;
  sc.bs_position = Vec2(0.0, 0.0);
  const Real radius = 50.0;
  for (Real deg : {-15.0, 75.0, 165.0, 255.0})
    sc.receiver_positions.push_back(
        radius * Vec2(std::cos(deg2rad(deg)), std::sin(deg2rad(deg))));
  sc.target_positions = {Vec2(289.8, 77.6), Vec2(212.1, 212.1)};
  sc.target_velocities = {Vec2(20.0, 0.0), Vec2(20.0, 0.0)};
  sc.user_positions = {Vec2(24.8, 283.2), Vec2(109.5, 300.8)};
  sc.carrier_hz = 3.0e9;
  sc.subcarrier_spacing_hz = 15e3;
  sc.num_subcarriers = subcarriers;
  sc.num_tx_antennas = antennas;
  sc.num_symbols = symbols;
  sc.cp_duration_s = 4.7e-6;
  sc.total_power_w = 5.0;
  sc.radar_noise_var = 1.5e-18;
  sc.comm_noise_var = 1.5e-14;
  sc.rcs_per_receiver = {0.095, 0.092, 0.098, 0.091};
  sc.detection_subareas = {{0.0, 30.0}, {30.0, 60.0}};
  return sc;
}

/// Single-target variant: one subarea, one receiver placed at the BS, target
/// straight down the x axis at the given bistatic delay.
inline Scenario monostatic_scenario(Real delay_s, int subcarriers = 16, int antennas = 8,
                                    int symbols = 8) {
  Scenario sc;
  sc.bs_position = Vec2(0.0, 0.0);
  sc.receiver_positions = {Vec2(0.0, 0.0)};
  const Real dist = 0.5 * delay_s * kSpeedOfLight;
  sc.target_positions = {Vec2(dist * std::cos(deg2rad(15.0)), dist * std::sin(deg2rad(15.0)))};
  sc.target_velocities = {Vec2(0.0, 0.0)};
  sc.user_positions = {Vec2(24.8, 283.2)};
  sc.carrier_hz = 3.0e9;
  sc.subcarrier_spacing_hz = 15e3;
  sc.num_subcarriers = subcarriers;
  sc.num_tx_antennas = antennas;
  sc.num_symbols = symbols;
  sc.cp_duration_s = 4.7e-6;
  sc.total_power_w = 5.0;
  sc.radar_noise_var = 1.5e-18;
  sc.comm_noise_var = 1.5e-14;
  sc.rcs_per_receiver = {0.095};
  sc.detection_subareas = {{0.0, 30.0}};
  return sc;
}

inline std::mt19937_64 rng(uint64_t seed = 7) { return std::mt19937_64(seed); }

}  // namespace dfrc::testing
