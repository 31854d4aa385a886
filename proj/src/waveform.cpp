#include "dfrc/waveform.hpp"

#include <cmath>

namespace dfrc {

namespace {

Complex unit_phase(std::mt19937_64& rng) {
  std::uniform_real_distribution<Real> u(0.0, 2.0 * kPi);
  return std::polar<Real>(1.0, u(rng));
}

Complex qpsk(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, 3);
  constexpr Real inv_sqrt2 = 0.7071067811865476;
  switch (u(rng)) {
    case 0: return {inv_sqrt2, inv_sqrt2};
    case 1: return {inv_sqrt2, -inv_sqrt2};
    case 2: return {-inv_sqrt2, inv_sqrt2};
    default: return {-inv_sqrt2, -inv_sqrt2};
  }
}

// Radar path amplitude towards target n: beta_{k,n}^H sum_n' sqrt(p_k) sigma Omega b.
// Only the owning subarea's beam is live on a radar subcarrier. Column 0
// holds the streaming predecessor symbol; columns 1..L the frame proper.
CMat radar_amplitudes(const Scenario& sc, const SymbolGrid& grid, const CovarianceSet& cov,
                      int n) {
  const int k_count = grid.subcarriers();
  const int l_count = grid.symbols();
  CMat amp = CMat::Zero(k_count, l_count + 1);
  const Real aod = target_aod(sc, n);
  for (int k = 0; k < k_count; ++k) {
    if (grid.owner[k].is_comm) continue;
    const int np = grid.owner[k].index;
    const Real gain = std::sqrt(grid.power_w(k));
    const CVec beta = steering_vector(sc, k, aod);
    const CVec w = cov.sqrt_factor(k, np).adjoint() * beta;  // (beta^H Omega)^H
    amp(k, 0) = gain * w.dot(grid.detect_pre_symbol(k, np));
    for (int l = 0; l < l_count; ++l)
      amp(k, l + 1) = gain * w.dot(grid.detect_symbols(k, np).col(l));
  }
  return amp;
}

}  // namespace

std::vector<CMat> make_detection_sequences(const std::vector<CVec>& seeds, int num_subcarriers,
                                           int num_subareas, int num_symbols, Real df,
                                           Real ts) {
  if (static_cast<int>(seeds.size()) != num_subcarriers * num_subareas)
    throw ConfigError("make_detection_sequences: need one seed per (subcarrier, subarea)");
  std::vector<CMat> out(seeds.size());
  for (int k = 0; k < num_subcarriers; ++k) {
    const Complex step = std::polar<Real>(1.0, 2.0 * kPi * static_cast<Real>(k) * df * ts);
    for (int n = 0; n < num_subareas; ++n) {
      const CVec& seed = seeds[k * num_subareas + n];
      CMat seq(seed.size(), num_symbols);
      seq.col(0) = seed;
      for (int l = 1; l < num_symbols; ++l) seq.col(l) = step * seq.col(l - 1);
      out[k * num_subareas + n] = std::move(seq);
    }
  }
  return out;
}

std::vector<CVec> random_detection_seeds(int num_subcarriers, int num_subareas,
                                         int num_antennas, std::mt19937_64& rng) {
  std::vector<CVec> seeds(num_subcarriers * num_subareas);
  for (auto& s : seeds) {
    s.resize(num_antennas);
    for (int t = 0; t < num_antennas; ++t) s(t) = unit_phase(rng);
  }
  return seeds;
}

SymbolGrid make_symbol_grid(const Scenario& sc, const std::vector<SubcarrierOwner>& owner,
                            const VecX& power_w, std::mt19937_64& rng, DetectionSymbols mode) {
  const int k_count = static_cast<int>(owner.size());
  const int l_count = sc.num_symbols;
  const int n_count = static_cast<int>(sc.detection_subareas.size());
  if (power_w.size() != k_count)
    throw ConfigError("make_symbol_grid: power vector length must match owner list");

  SymbolGrid grid;
  grid.owner = owner;
  grid.power_w = power_w;
  grid.num_users = sc.num_users();
  grid.num_subareas = n_count;
  grid.comm_symbols = CMat::Zero(k_count, l_count);
  for (int k = 0; k < k_count; ++k) {
    if (!owner[k].is_comm) continue;
    for (int l = 0; l < l_count; ++l) grid.comm_symbols(k, l) = qpsk(rng);
  }

  if (mode == DetectionSymbols::cp_extension) {
    const auto seeds = random_detection_seeds(k_count, n_count, sc.num_tx_antennas, rng);
    grid.detect = make_detection_sequences(seeds, k_count, n_count, l_count,
                                           sc.subcarrier_spacing_hz, sc.symbol_duration_s());
    // Rewind the recursion one step for the streaming predecessor.
    grid.detect_pre.resize(seeds.size());
    for (int k = 0; k < k_count; ++k) {
      const Complex step = std::polar<Real>(
          1.0, -2.0 * kPi * static_cast<Real>(k) * sc.subcarrier_spacing_hz *
                   sc.symbol_duration_s());
      for (int n = 0; n < n_count; ++n)
        grid.detect_pre[k * n_count + n] = step * seeds[k * n_count + n];
    }
  } else {
    grid.detect.resize(static_cast<size_t>(k_count) * n_count);
    grid.detect_pre.resize(grid.detect.size());
    for (auto& seq : grid.detect) {
      seq.resize(sc.num_tx_antennas, l_count);
      for (int l = 0; l < l_count; ++l)
        for (int t = 0; t < sc.num_tx_antennas; ++t) seq(t, l) = unit_phase(rng);
    }
    for (auto& pre : grid.detect_pre) {
      pre.resize(sc.num_tx_antennas);
      for (int t = 0; t < sc.num_tx_antennas; ++t) pre(t) = unit_phase(rng);
    }
  }
  return grid;
}

BasebandFrame synthesize_baseband(const Scenario& sc, const SymbolGrid& grid,
                                  const std::vector<CVec>& comm_beams,
                                  const CovarianceSet& cov, int oversample) {
  const int k_count = grid.subcarriers();
  const int l_count = grid.symbols();
  if (oversample < 1) throw ConfigError("synthesize_baseband: oversample must be >= 1");
  const Real df = sc.subcarrier_spacing_hz;
  const Real t_sym = sc.symbol_period_s();
  const Real ts = sc.symbol_duration_s();
  const Real dt = t_sym / static_cast<Real>(oversample * k_count);

  // Per-(k,l) transmit vectors s_{k,l}.
  std::vector<CMat> sym(k_count);  // each T_x x L
  for (int k = 0; k < k_count; ++k) {
    sym[k].resize(sc.num_tx_antennas, l_count);
    const Real amp = std::sqrt(grid.power_w(k));
    if (grid.owner[k].is_comm) {
      for (int l = 0; l < l_count; ++l)
        sym[k].col(l) = amp * grid.comm_symbols(k, l) * comm_beams.at(k);
    } else {
      const CMat& omega = cov.sqrt_factor(k, grid.owner[k].index);
      sym[k] = amp * omega * grid.detect_symbols(k, grid.owner[k].index);
    }
  }

  const Real t_start = -sc.cp_duration_s;
  const Real t_end = static_cast<Real>(l_count - 1) * ts + t_sym;
  const int num_samples = static_cast<int>(std::floor((t_end - t_start) / dt)) + 1;

  BasebandFrame frame;
  frame.dt = dt;
  frame.t0 = t_start;
  frame.samples = CMat::Zero(sc.num_tx_antennas, num_samples);
  for (int i = 0; i < num_samples; ++i) {
    const Real t = t_start + static_cast<Real>(i) * dt;
    for (int l = 0; l < l_count; ++l) {
      const Real rel = t - static_cast<Real>(l) * ts;
      if (rel < -sc.cp_duration_s || rel > t_sym) continue;
      for (int k = 0; k < k_count; ++k) {
        const Complex carrier = std::polar<Real>(1.0, 2.0 * kPi * static_cast<Real>(k) * df * t);
        frame.samples.col(i) += carrier * sym[k].col(l);
      }
    }
  }
  return frame;
}

EchoGrid simulate_echo(const Scenario& sc, const SymbolGrid& grid, const CovarianceSet& cov,
                       int r, bool active, int oversample, std::mt19937_64* noise_rng) {
  const int k_count = grid.subcarriers();
  const int l_count = grid.symbols();
  const int n_count = sc.num_targets();
  const Real df = sc.subcarrier_spacing_hz;
  const Real t_sym = sc.symbol_period_s();
  const Real ts = sc.symbol_duration_s();
  const int s_count = oversample * k_count;
  const Real dt = t_sym / static_cast<Real>(s_count);

  EchoGrid echo;
  echo.dt = dt;
  echo.oversample = oversample;
  echo.samples = CMat::Zero(l_count, s_count + 1);

  if (active) {
    std::vector<Real> delay(n_count), doppler(n_count), loss(n_count);
    std::vector<CMat> amp(n_count);
    for (int n = 0; n < n_count; ++n) {
      delay[n] = bistatic_delay(sc, n, r);
      doppler[n] = bistatic_doppler(sc, n, r);
      loss[n] = radar_pathloss(sc, n, r);
      amp[n] = radar_amplitudes(sc, grid, cov, n);
      if (delay[n] >= static_cast<Real>(l_count) * ts)
        throw NumericalError("simulate_echo: delay exceeds the simulation window");
    }

    for (int lw = 0; lw < l_count; ++lw) {
      for (int i = 0; i <= s_count; ++i) {
        const Real t = static_cast<Real>(lw) * ts + static_cast<Real>(i) * dt;
        Complex acc = 0;
        for (int n = 0; n < n_count; ++n) {
          const Complex doppler_rot =
              std::polar<Real>(loss[n], 2.0 * kPi * doppler[n] * t);
          // Symbols whose CP-extended support covers t; the streaming
          // predecessor (index -1) backs the earliest windows.
          const int l_hi = static_cast<int>(
              std::floor((t - delay[n] + sc.cp_duration_s) / ts + 1e-12));
          for (int l = std::max(-1, l_hi - 1); l <= std::min(l_count - 1, l_hi); ++l) {
            const Real rel = t - delay[n] - static_cast<Real>(l) * ts;
            if (rel < -sc.cp_duration_s - 1e-18 || rel > t_sym + 1e-18) continue;
            Complex sum_k = 0;
            for (int k = 0; k < k_count; ++k) {
              if (amp[n](k, l + 1) == Complex(0)) continue;
              sum_k += std::polar<Real>(1.0, 2.0 * kPi * static_cast<Real>(k) * df * rel) *
                       amp[n](k, l + 1);
            }
            acc += doppler_rot * sum_k;
          }
        }
        echo.samples(lw, i) += acc;
      }
    }
  }

  if (noise_rng != nullptr) {
    // Per-sample variance S * sigma_wbar^2 yields demodulated variance
    // sigma_wbar^2 = sigma_w^2 / K on every subcarrier.
    const Real per_component = std::sqrt(static_cast<Real>(s_count) * sc.radar_noise_var / 2.0);
    std::normal_distribution<Real> gauss(0.0, per_component);
    for (int lw = 0; lw < l_count; ++lw)
      for (int i = 0; i <= s_count; ++i)
        echo.samples(lw, i) += Complex(gauss(*noise_rng), gauss(*noise_rng));
  }
  return echo;
}

Complex demodulate(const EchoGrid& echo, int k, int l, Real df) {
  if (l < 0 || l >= echo.samples.rows())
    throw NumericalError("demodulate: symbol window out of range");
  const int s_count = static_cast<int>(echo.samples.cols()) - 1;
  const Real t_sym = echo.dt * static_cast<Real>(s_count);
  Complex acc = 0;
  for (int i = 0; i <= s_count; ++i) {
    const Real w = (i == 0 || i == s_count) ? 0.5 : 1.0;
    const Real t = static_cast<Real>(i) * echo.dt;
    acc += w * echo.samples(l, i) *
           std::polar<Real>(1.0, -2.0 * kPi * static_cast<Real>(k) * df * t);
  }
  return acc * echo.dt / t_sym;
}

CMat demodulate_all(const EchoGrid& echo, int num_subcarriers, Real df) {
  const int l_count = static_cast<int>(echo.samples.rows());
  CMat out(num_subcarriers, l_count);
  for (int k = 0; k < num_subcarriers; ++k)
    for (int l = 0; l < l_count; ++l) out(k, l) = demodulate(echo, k, l, df);
  return out;
}

CMat demod_mean(const Scenario& sc, const SymbolGrid& grid, const CovarianceSet& cov, int r) {
  const int k_count = grid.subcarriers();
  const int l_count = grid.symbols();
  const Real df = sc.subcarrier_spacing_hz;
  const Real ts = sc.symbol_duration_s();
  CMat mean = CMat::Zero(k_count, l_count);
  for (int n = 0; n < sc.num_targets(); ++n) {
    const Real tau = bistatic_delay(sc, n, r);
    const Real fd = bistatic_doppler(sc, n, r);
    const Real loss = radar_pathloss(sc, n, r);
    const CMat amp = radar_amplitudes(sc, grid, cov, n);
    for (int k = 0; k < k_count; ++k) {
      const Complex delay_rot =
          std::polar<Real>(loss, -2.0 * kPi * static_cast<Real>(k) * df * tau);
      for (int l = 0; l < l_count; ++l) {
        const Complex doppler_rot =
            std::polar<Real>(1.0, 2.0 * kPi * static_cast<Real>(l) * ts * fd);
        mean(k, l) += delay_rot * doppler_rot * amp(k, l + 1);
      }
    }
  }
  return mean;
}

IciReport ici_residual(const Scenario& sc, const SymbolGrid& grid, const CovarianceSet& cov,
                       int r, int oversample) {
  const EchoGrid echo = simulate_echo(sc, grid, cov, r, true, oversample, nullptr);
  const CMat measured = demodulate_all(echo, grid.subcarriers(), sc.subcarrier_spacing_hz);
  const CMat expected = demod_mean(sc, grid, cov, r);

  IciReport report;
  report.scale = expected.cwiseAbs().maxCoeff();
  const Real scale = report.scale > 0 ? report.scale : 1.0;
  report.residual = (measured - expected).cwiseAbs() / scale;
  report.max_rel = report.residual.maxCoeff();
  return report;
}

CVec mrt_beamformer(const CVec& h) {
  const Real norm = h.norm();
  if (norm <= 0) throw NumericalError("mrt_beamformer: zero channel");
  return h / norm;
}

Real comm_rate(const CVec& h, Real power_w, Real noise_var) {
  if (power_w < 0) throw ConfigError("comm_rate: negative power");
  return std::log2(1.0 + h.squaredNorm() * power_w / noise_var);
}

}  // namespace dfrc
