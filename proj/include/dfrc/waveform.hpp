#pragma once

#include <random>
#include <vector>

#include "dfrc/beampattern.hpp"
#include "dfrc/scenario.hpp"
#include "dfrc/types.hpp"

namespace dfrc {

/// Per-subcarrier owner: either a communication user or a detection subarea.
struct SubcarrierOwner {
  bool is_comm = true;
  int index = 0;
};

/// One frame of transmit symbols: the subcarrier assignment, per-subcarrier
/// power, the owning user's data symbols and the deterministic detection
/// sequences b^R_{k,n,l}.
struct SymbolGrid {
  std::vector<SubcarrierOwner> owner;  // size K; exactly one owner per subcarrier
  VecX power_w;                        // p_k
  CMat comm_symbols;                   // K x L, unit-modulus, zero on radar rows
  std::vector<CMat> detect;            // index k*N+n, each T_x x L
  /// Streaming predecessor b_{k,n,-1}: the detection stream runs before the
  /// frame, so delays up to T_s reach a well-defined previous symbol.
  std::vector<CVec> detect_pre;
  int num_users = 0;
  int num_subareas = 0;

  int subcarriers() const { return static_cast<int>(owner.size()); }
  int symbols() const { return static_cast<int>(comm_symbols.cols()); }
  const CMat& detect_symbols(int k, int n) const { return detect.at(k * num_subareas + n); }
  const CVec& detect_pre_symbol(int k, int n) const {
    return detect_pre.at(k * num_subareas + n);
  }
};

enum class DetectionSymbols {
  cp_extension,  // b_{k,n,l} = exp(j 2 pi (k) df Ts) b_{k,n,l-1} (Lemma-1 sequences)
  independent,   // i.i.d. unit-modulus draws per symbol
};

/// Propagates seed symbols b_{k,n,0} through the CP-extension recursion.
/// Subcarrier k (0-based) advances by exp(j 2 pi k df ts) per symbol.
std::vector<CMat> make_detection_sequences(const std::vector<CVec>& seeds, int num_subcarriers,
                                           int num_subareas, int num_symbols, Real df, Real ts);

/// Unit-modulus random seeds, one T_x-vector per (k, n).
std::vector<CVec> random_detection_seeds(int num_subcarriers, int num_subareas,
                                         int num_antennas, std::mt19937_64& rng);

/// Assembles a full frame: QPSK data for comm-owned subcarriers and
/// detection sequences (CP-extension or independent) for every (k, n).
SymbolGrid make_symbol_grid(const Scenario& sc, const std::vector<SubcarrierOwner>& owner,
                            const VecX& power_w, std::mt19937_64& rng,
                            DetectionSymbols mode = DetectionSymbols::cp_extension);

/// Sampled multi-antenna baseband signal.
struct BasebandFrame {
  CMat samples;  // T_x x num_samples
  Real dt = 0;
  Real t0 = 0;  // time of column 0
};

/// Evaluates the transmit waveform (sum over subcarriers and symbols with the
/// rectangular CP window) on a uniform grid covering [-T_cp, (L-1)Ts + T].
/// comm_beams holds the per-subcarrier MRT vector for comm-owned entries.
BasebandFrame synthesize_baseband(const Scenario& sc, const SymbolGrid& grid,
                                  const std::vector<CVec>& comm_beams,
                                  const CovarianceSet& cov, int oversample);

/// Scalar echo sampled on the demodulation windows: row l holds
/// y_r(l*Ts + i*dt), i = 0..S with dt = T/S and S = oversample * K.
struct EchoGrid {
  CMat samples;  // L x (S+1)
  Real dt = 0;
  int oversample = 0;
};

/// Radar echo at receiver r per the bistatic delay/Doppler model; inactive
/// receivers (active = false) contribute noise only. Pass a RNG to add
/// complex white noise calibrated so the demodulated variance equals
/// sc.radar_noise_var.
EchoGrid simulate_echo(const Scenario& sc, const SymbolGrid& grid, const CovarianceSet& cov,
                       int r, bool active, int oversample,
                       std::mt19937_64* noise_rng = nullptr);

/// Correlation of one demodulation window with subcarrier k:
/// (1/T) integral over [0, T] of y(t + l Ts) exp(-j 2 pi k df t) dt,
/// trapezoidal on the stored sample grid.
Complex demodulate(const EchoGrid& echo, int k, int l, Real df);

/// Demodulates every (k, l) cell.
CMat demodulate_all(const EchoGrid& echo, int num_subcarriers, Real df);

/// Closed-form demodulated mean: sum over targets of
/// c_{n,r} e^{j 2 pi l Ts f} e^{-j 2 pi k df tau} beta^H Omega b (0-based k, l).
CMat demod_mean(const Scenario& sc, const SymbolGrid& grid, const CovarianceSet& cov, int r);

struct IciReport {
  MatX residual;    // |demod - closed form| / scale, K x L
  Real max_rel = 0;
  Real scale = 0;   // max |closed form| over the grid
};

/// Simulates the noise-free echo, demodulates it and compares against the
/// closed-form mean. With CP-extension sequences and zero Doppler the
/// residual stays at quadrature level even when delays exceed the CP.
IciReport ici_residual(const Scenario& sc, const SymbolGrid& grid, const CovarianceSet& cov,
                       int r, int oversample);

/// MRT beamformer h/|h|. Throws on a zero channel.
CVec mrt_beamformer(const CVec& h);

/// Single-subcarrier rate log2(1 + |h|^2 p / noise) in bits/s/Hz.
Real comm_rate(const CVec& h, Real power_w, Real noise_var);

}  // namespace dfrc
