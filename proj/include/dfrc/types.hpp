#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dfrc {

using Real = double;
using Complex = std::complex<Real>;

using Vec2 = Eigen::Matrix<Real, 2, 1>;
using Mat2 = Eigen::Matrix<Real, 2, 2>;
using VecX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using MatX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using CVec = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
using CMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using VecXi = Eigen::VectorXi;

inline constexpr Real kSpeedOfLight = 299792458.0;  // m/s, exact SI value
inline constexpr Real kPi = 3.14159265358979323846;

constexpr Real deg2rad(Real deg) { return deg * kPi / 180.0; }
constexpr Real rad2deg(Real rad) { return rad * 180.0 / kPi; }

/// Degenerate geometry (coincident points where a distance must be positive).
struct DegenerateGeometryError : std::domain_error {
  using std::domain_error::domain_error;
};

/// A constraint system that admits no feasible point.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown (singular information matrix, failed factorization, ...).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dfrc
