#pragma once

#include <vector>

#include "dfrc/beampattern.hpp"
#include "dfrc/scenario.hpp"
#include "dfrc/types.hpp"

namespace dfrc {

/// Index convention for the information-block sums.
///
/// `literal` uses subcarrier weight k*df and symbol weight l*T with 1-based
/// k, l (the closed-form expressions as printed). `physical` uses the
/// 0-based offsets (k-1)*df and (l-1)*Ts that match the demodulated echo
/// model exactly.
enum class PhaseConvention { literal, physical };

struct FimOptions {
  PhaseConvention convention = PhaseConvention::literal;
};

/// Per-(target, receiver, subcarrier, beam) 2x2 information blocks.
///
/// D carries location information, V velocity information; both include the
/// path-loss prefactor 8 pi^2 |c|^2 / sigma^2 and the beam gain
/// beta^H R beta. Beam gains are evaluated at the carrier wavelength
/// (fractional bandwidth is < 1e-3 here), so V blocks depend on the
/// subcarrier only through the covariance the caller supplies.
struct FimBlocks {
  int num_targets = 0;     // N
  int num_receivers = 0;   // R_x
  int num_subcarriers = 0; // K
  std::vector<Mat2> d;     // index ((n*Rx + r)*K + k)*N + np
  std::vector<Mat2> v;
  MatX beam_gain;          // (n*N + np) x K : beta_n^H R_{k,np} beta_n
  PhaseConvention convention = PhaseConvention::literal;

  int idx(int n, int r, int k, int np) const {
    return ((n * num_receivers + r) * num_subcarriers + k) * num_targets + np;
  }
  const Mat2& location(int n, int r, int k, int np) const { return d[idx(n, r, k, np)]; }
  const Mat2& velocity(int n, int r, int k, int np) const { return v[idx(n, r, k, np)]; }
};

/// Builds every information block for the scenario and covariance set.
FimBlocks info_blocks(const Scenario& sc, const CovarianceSet& cov, const FimOptions& opts = {});

/// Single (D, V) pair, matching info_blocks entry (n, r, k, np).
std::pair<Mat2, Mat2> info_block(const Scenario& sc, const CovarianceSet& cov, int n, int r,
                                 int k, int np, const FimOptions& opts = {});

struct CrbPair {
  Mat2 location = Mat2::Zero();  // m^2
  Mat2 velocity = Mat2::Zero();  // (m/s)^2
};

/// CRB matrices per target: inverse of the mask- and power-weighted block
/// sums. radar_weight(k, np) = p_k * sigma^R_{k,np}; mask holds s_r in {0,1}.
/// Throws NumericalError with a diagnostic when the information is singular.
std::vector<CrbPair> crb_matrices(const FimBlocks& blocks, const MatX& radar_weight,
                                  const std::vector<int>& mask);

/// Location/velocity information sums (before inversion) per target.
std::vector<std::pair<Mat2, Mat2>> information_sums(const FimBlocks& blocks,
                                                    const MatX& radar_weight,
                                                    const std::vector<int>& mask);

struct FdSteps {
  Real delay_s = 1e-9;
  Real doppler_hz = 0.5;
};

/// Finite-difference Fisher information of the full parameter vector
/// theta = (d_1, v_1, ..., d_N, v_N): differentiates the demodulated mean
/// with respect to (tau, f), then maps through the analytic Jacobian.
/// The mean absorbs the beam covariance square root so the result matches
/// the expectation-based analytic blocks; it exposes the cross-target
/// coupling the block-diagonal path ignores.
MatX fim_numerical(const Scenario& sc, const MatX& radar_weight, const CovarianceSet& cov,
                   const std::vector<int>& mask, const FdSteps& steps = {},
                   const FimOptions& opts = {});

}  // namespace dfrc
