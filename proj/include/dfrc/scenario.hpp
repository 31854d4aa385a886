#pragma once

#include <vector>

#include "dfrc/types.hpp"

namespace dfrc {

/// Closed angular interval in degrees, used for detection subareas.
struct AngleInterval {
  Real lo_deg = 0;
  Real hi_deg = 0;
  bool contains_deg(Real a) const { return a >= lo_deg && a <= hi_deg; }
};

/// Static description of one deployment: transmitter, radar receivers,
/// targets, communication users and the RF constants tying them together.
///
/// All geometry is 2-D (positions in meters, velocities in m/s). The BS is
/// the only transmitter; receivers and users are single-antenna.
struct Scenario {
  Vec2 bs_position = Vec2::Zero();
  std::vector<Vec2> receiver_positions;
  std::vector<Vec2> target_positions;
  std::vector<Vec2> target_velocities;
  std::vector<Vec2> user_positions;

  Real carrier_hz = 3.0e9;             // f_c
  Real subcarrier_spacing_hz = 15e3;   // delta f
  int num_subcarriers = 64;            // K
  int num_tx_antennas = 32;            // T_x
  int num_symbols = 32;                // L
  Real cp_duration_s = 4.7e-6;         // T_cp

  Real total_power_w = 5.0;            // P_max
  Real radar_noise_var = 1.5e-18;      // post-demodulation variance per subcarrier
  Real comm_noise_var = 1.5e-14;
  std::vector<Real> rcs_per_receiver;

  std::vector<AngleInterval> detection_subareas;  // one target per subarea

  int num_receivers() const { return static_cast<int>(receiver_positions.size()); }
  int num_targets() const { return static_cast<int>(target_positions.size()); }
  int num_users() const { return static_cast<int>(user_positions.size()); }

  /// Useful OFDM symbol period T = 1/delta_f. Held exact by construction.
  Real symbol_period_s() const { return 1.0 / subcarrier_spacing_hz; }
  /// Full symbol duration T_s = T + T_cp.
  Real symbol_duration_s() const { return symbol_period_s() + cp_duration_s; }

  Real carrier_wavelength_m() const { return kSpeedOfLight / carrier_hz; }
  /// Half-wavelength element spacing d = c / (2 f_c).
  Real antenna_spacing_m() const { return kSpeedOfLight / (2.0 * carrier_hz); }
  /// Per-subcarrier wavelength, 0-based index: c / (f_c + k*delta_f).
  Real wavelength_m(int k) const {
    return kSpeedOfLight / (carrier_hz + static_cast<Real>(k) * subcarrier_spacing_hz);
  }

  /// Throws ConfigError when a structural invariant is violated.
  void validate() const;
};

/// Geometry of one BS -> target -> receiver path together with the analytic
/// partial derivatives feeding the Fisher information Jacobian.
struct PathGeometry {
  Real delay_s = 0;
  Real doppler_hz = 0;
  Real aod_rad = 0;
  Vec2 delay_grad = Vec2::Zero();        // d tau / d (x,y), s/m
  Vec2 doppler_grad_pos = Vec2::Zero();  // d f / d (x,y), Hz/m
  Vec2 doppler_grad_vel = Vec2::Zero();  // d f / d (vx,vy), Hz/(m/s)
};

/// Bistatic propagation delay (|p0-d| + |d-p_r|)/c. Coincident endpoints
/// simply drop the zero-length leg.
Real bistatic_delay(const Scenario& sc, int n, int r);

/// Bistatic Doppler at the carrier wavelength. Throws DegenerateGeometryError
/// if the target coincides with the BS or the receiver.
Real bistatic_doppler(const Scenario& sc, int n, int r);

/// Angle of departure from the BS to target n (atan2, full quadrant).
Real target_aod(const Scenario& sc, int n);

/// Angle from the BS to communication user m.
Real user_angle(const Scenario& sc, int m);

/// Steering vector for a uniform linear array: entries
/// exp(-j 2 pi d t sin(theta) / lambda), t = 0..num_antennas-1.
CVec steering_vector(Real wavelength_m, Real spacing_m, Real angle_rad, int num_antennas);

/// Steering vector of subcarrier k (0-based) at the given angle.
CVec steering_vector(const Scenario& sc, int k, Real angle_rad);

/// Two-hop radar amplitude loss c_{n,r} = sqrt(lambda^2 RCS / ((4pi)^3 d0^2 dr^2)).
Real radar_pathloss(const Scenario& sc, int n, int r);

/// Free-space channel h_{k,m} = a_m * a_k(gamma_m) between BS and user m.
CVec comm_channel(const Scenario& sc, int k, int m);

/// Delay/Doppler values and their analytic gradients for path (n, r).
PathGeometry geometry_partials(const Scenario& sc, int n, int r);

}  // namespace dfrc
