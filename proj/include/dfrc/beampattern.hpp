#pragma once

#include <vector>

#include "dfrc/scenario.hpp"
#include "dfrc/types.hpp"

namespace dfrc {

/// Desired transmit pattern sampled on an angle grid: 1 inside the subarea,
/// 0 outside.
struct PatternSpec {
  VecX sample_angles_rad;  // strictly increasing, within [-pi/2, pi/2]
  VecX desired;            // P(theta_q), entries in {0, 1}

  /// Box pattern for one subarea on a uniform grid over [-90, 90] degrees.
  static PatternSpec box(const AngleInterval& subarea, int num_samples = 181);
};

struct DesignOptions {
  Real tol = 1e-10;     // stop when the objective drop over a 10-iteration window is below this
  int max_iter = 3000;
  int stall_window = 10;
};

struct DesignResult {
  CMat covariance;   // Hermitian PSD, diag = 1/T_x
  Real scale = 0;    // fitted amplitude a >= 0
  Real objective = 0;
  bool converged = false;
  int iterations = 0;
};

/// Fits a transmit covariance to the desired pattern by minimizing
/// sum_q |a P(theta_q) - a^H(theta_q) R a(theta_q)|^2 over {R PSD Hermitian,
/// diag(R) = 1/T_x, a >= 0}. Alternates a closed-form scale update with a
/// projected gradient step on R; the objective is non-increasing across
/// iterations.
DesignResult design_covariance(const PatternSpec& spec, Real wavelength_m, Real spacing_m,
                               int num_antennas, const DesignOptions& opts = {});

/// Subcarrier-k design for the scenario's array.
DesignResult design_covariance(const PatternSpec& spec, const Scenario& sc, int k,
                               const DesignOptions& opts = {});

/// Hermitian PSD square root via eigendecomposition; eigenvalues in
/// [-1e-10, 0) are clipped to zero, anything lower is an error.
CMat matrix_sqrt(const CMat& r);

/// Pattern gain a^H(theta) R a(theta); real and nonnegative for PSD R.
Real pattern_gain(const CMat& r, const CVec& steer);

/// Per-(subcarrier, subarea) transmit covariances and their square roots.
struct CovarianceSet {
  int num_subcarriers = 0;  // K
  int num_subareas = 0;     // N
  int num_antennas = 0;     // T_x
  std::vector<CMat> r;      // index k * N + n
  std::vector<CMat> omega;  // sqrt factors, same indexing
  VecX scale;               // fitted a per (k, n)
  VecX objective;
  bool all_converged = true;

  const CMat& covariance(int k, int n) const { return r.at(idx(k, n)); }
  const CMat& sqrt_factor(int k, int n) const { return omega.at(idx(k, n)); }
  int idx(int k, int n) const { return k * num_subareas + n; }
};

/// Designs one covariance per subarea and shares it across subcarriers
/// (fractional bandwidth K*df/f_c is < 1e-3 at the deployment scales here,
/// so the per-subcarrier designs coincide to within the design residual).
/// Set per_subcarrier to run the full K x N design with lambda_k instead.
CovarianceSet design_covariance_set(const Scenario& sc, bool per_subcarrier = false,
                                    const DesignOptions& opts = {}, int num_samples = 181);

/// Equal partition of [0, 60] degrees into n subareas.
std::vector<AngleInterval> equal_subareas(int n);

}  // namespace dfrc
