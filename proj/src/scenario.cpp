#include "dfrc/scenario.hpp"

#include <cmath>

namespace dfrc {

namespace {

constexpr Real kLengthEps = 1e-12;  // meters; below this two points coincide

std::string idx_msg(const char* what, int n, int r) {
  return std::string(what) + " for target " + std::to_string(n) + ", receiver " +
         std::to_string(r);
}

}  // namespace

void Scenario::validate() const {
  if (num_subcarriers < 1) throw ConfigError("num_subcarriers must be >= 1");
  if (num_tx_antennas < 2) throw ConfigError("num_tx_antennas must be >= 2");
  if (num_symbols < 1) throw ConfigError("num_symbols must be >= 1");
  if (carrier_hz <= 0) throw ConfigError("carrier_hz must be positive");
  if (subcarrier_spacing_hz <= 0) throw ConfigError("subcarrier_spacing_hz must be positive");
  if (cp_duration_s < 0) throw ConfigError("cp_duration_s must be nonnegative");
  if (total_power_w <= 0) throw ConfigError("total_power_w must be positive");
  if (radar_noise_var <= 0) throw ConfigError("radar_noise_var must be positive");
  if (comm_noise_var <= 0) throw ConfigError("comm_noise_var must be positive");
  if (target_positions.size() != target_velocities.size())
    throw ConfigError("target_positions and target_velocities must have equal length");
  if (rcs_per_receiver.size() != receiver_positions.size())
    throw ConfigError("rcs_per_receiver must have one entry per receiver");
  for (Real rcs : rcs_per_receiver)
    if (rcs <= 0) throw ConfigError("rcs_per_receiver entries must be positive");

  if (detection_subareas.size() != target_positions.size())
    throw ConfigError("need exactly one target per detection subarea");
  for (size_t i = 0; i < detection_subareas.size(); ++i) {
    const auto& a = detection_subareas[i];
    if (a.lo_deg >= a.hi_deg || a.lo_deg < -90.0 || a.hi_deg > 90.0)
      throw ConfigError("detection subarea " + std::to_string(i) +
                        " must be a nonempty interval within [-90, 90] degrees");
    for (size_t j = 0; j < i; ++j) {
      const auto& b = detection_subareas[j];
      if (a.lo_deg < b.hi_deg && b.lo_deg < a.hi_deg)
        throw ConfigError("detection subareas " + std::to_string(j) + " and " +
                          std::to_string(i) + " overlap");
    }
  }
  for (size_t n = 0; n < target_positions.size(); ++n) {
    const Real aod = rad2deg(target_aod(*this, static_cast<int>(n)));
    if (!detection_subareas[n].contains_deg(aod))
      throw ConfigError("target " + std::to_string(n) + " (aod " + std::to_string(aod) +
                        " deg) lies outside its detection subarea");
  }
}

Real bistatic_delay(const Scenario& sc, int n, int r) {
  const Vec2& d = sc.target_positions.at(n);
  const Vec2& pr = sc.receiver_positions.at(r);
  return ((sc.bs_position - d).norm() + (d - pr).norm()) / kSpeedOfLight;
}

Real bistatic_doppler(const Scenario& sc, int n, int r) {
  const Vec2& d = sc.target_positions.at(n);
  const Vec2& v = sc.target_velocities.at(n);
  const Vec2& pr = sc.receiver_positions.at(r);
  const Real lambda = sc.carrier_wavelength_m();
  const Real r0 = (sc.bs_position - d).norm();
  const Real rr = (pr - d).norm();
  if (r0 < kLengthEps || rr < kLengthEps)
    throw DegenerateGeometryError(idx_msg("coincident points in bistatic_doppler", n, r));
  return v.dot(sc.bs_position - d) / (lambda * r0) + v.dot(pr - d) / (lambda * rr);
}

Real target_aod(const Scenario& sc, int n) {
  const Vec2 rel = sc.target_positions.at(n) - sc.bs_position;
  if (rel.norm() < kLengthEps)
    throw DegenerateGeometryError("target " + std::to_string(n) + " coincides with the BS");
  return std::atan2(rel.y(), rel.x());
}

Real user_angle(const Scenario& sc, int m) {
  const Vec2 rel = sc.user_positions.at(m) - sc.bs_position;
  if (rel.norm() < kLengthEps)
    throw DegenerateGeometryError("user " + std::to_string(m) + " coincides with the BS");
  return std::atan2(rel.y(), rel.x());
}

CVec steering_vector(Real wavelength_m, Real spacing_m, Real angle_rad, int num_antennas) {
  CVec a(num_antennas);
  const Real step = -2.0 * kPi * spacing_m * std::sin(angle_rad) / wavelength_m;
  for (int t = 0; t < num_antennas; ++t)
    a(t) = std::polar<Real>(1.0, step * static_cast<Real>(t));
  return a;
}

CVec steering_vector(const Scenario& sc, int k, Real angle_rad) {
  return steering_vector(sc.wavelength_m(k), sc.antenna_spacing_m(), angle_rad,
                         sc.num_tx_antennas);
}

Real radar_pathloss(const Scenario& sc, int n, int r) {
  const Vec2& d = sc.target_positions.at(n);
  const Real d0 = (sc.bs_position - d).norm();
  const Real dr = (d - sc.receiver_positions.at(r)).norm();
  if (d0 < kLengthEps || dr < kLengthEps)
    throw DegenerateGeometryError(idx_msg("zero distance in radar_pathloss", n, r));
  const Real lambda = sc.carrier_wavelength_m();
  const Real four_pi_cubed = std::pow(4.0 * kPi, 3);
  return std::sqrt(lambda * lambda * sc.rcs_per_receiver.at(r) /
                   (four_pi_cubed * d0 * d0 * dr * dr));
}

CVec comm_channel(const Scenario& sc, int k, int m) {
  const Real dm = (sc.user_positions.at(m) - sc.bs_position).norm();
  if (dm < kLengthEps)
    throw DegenerateGeometryError("user " + std::to_string(m) + " collocated with the BS");
  const Real lambda = sc.carrier_wavelength_m();
  const Real am = std::sqrt(lambda * lambda / (std::pow(4.0 * kPi, 2) * dm * dm));
  return am * steering_vector(sc, k, user_angle(sc, m));
}

PathGeometry geometry_partials(const Scenario& sc, int n, int r) {
  const Vec2& d = sc.target_positions.at(n);
  const Vec2& v = sc.target_velocities.at(n);
  const Vec2& pr = sc.receiver_positions.at(r);
  const Real lambda = sc.carrier_wavelength_m();

  const Vec2 to_bs = sc.bs_position - d;  // target -> BS
  const Vec2 to_rx = pr - d;              // target -> receiver
  const Real r0 = to_bs.norm();
  const Real rr = to_rx.norm();
  if (r0 < kLengthEps || rr < kLengthEps)
    throw DegenerateGeometryError(idx_msg("coincident points in geometry_partials", n, r));

  const Vec2 e0 = to_bs / r0;
  const Vec2 er = to_rx / rr;

  PathGeometry g;
  g.delay_s = (r0 + rr) / kSpeedOfLight;
  g.doppler_hz = (v.dot(e0) + v.dot(er)) / lambda;
  g.aod_rad = target_aod(sc, n);

  // d|p - d|/dd = (d - p)/|d - p| = -e, so d tau/dd = -(e0 + er)/c.
  g.delay_grad = -(e0 + er) / kSpeedOfLight;

  // d/dd [ v.(p-d)/|p-d| ] = ((v.e) e - v)/|p-d| for each leg.
  g.doppler_grad_pos =
      ((v.dot(e0) * e0 - v) / r0 + (v.dot(er) * er - v) / rr) / lambda;

  g.doppler_grad_vel = (e0 + er) / lambda;
  return g;
}

}  // namespace dfrc
