#include "dfrc/fim.hpp"

#include <cmath>

namespace dfrc {

namespace {

struct SymbolSums {
  Real count;      // sum over l of 1
  Real linear;     // sum over l of l-index
  Real quadratic;  // sum over l of l-index^2
};

SymbolSums symbol_sums(int l_count, PhaseConvention conv) {
  const Real lr = static_cast<Real>(l_count);
  if (conv == PhaseConvention::literal) {
    return {lr, lr * (lr + 1) / 2.0, lr * (lr + 1) * (2.0 * lr + 1) / 6.0};
  }
  return {lr, lr * (lr - 1) / 2.0, (lr - 1) * lr * (2.0 * lr - 1) / 6.0};
}

Real subcarrier_weight(int k, Real df, PhaseConvention conv) {
  const Real ki = conv == PhaseConvention::literal ? static_cast<Real>(k + 1)
                                                   : static_cast<Real>(k);
  return ki * df;
}

Real symbol_index(int l, PhaseConvention conv) {
  return conv == PhaseConvention::literal ? static_cast<Real>(l + 1) : static_cast<Real>(l);
}

Mat2 outer(const Vec2& a, const Vec2& b) { return a * b.transpose(); }

Mat2 invert_information(const Mat2& info, const char* what) {
  const Real scale = info.cwiseAbs().maxCoeff();
  const Real det = info(0, 0) * info(1, 1) - info(0, 1) * info(1, 0);
  if (!(scale > 0) || std::abs(det) <= 1e-15 * scale * scale) {
    Eigen::SelfAdjointEigenSolver<Mat2> eig(info);
    throw NumericalError(std::string("singular ") + what +
                         " information (eigenvalues " + std::to_string(eig.eigenvalues()(0)) +
                         ", " + std::to_string(eig.eigenvalues()(1)) + ")");
  }
  Mat2 inv;
  inv << info(1, 1), -info(0, 1), -info(1, 0), info(0, 0);
  return inv / det;
}

}  // namespace

FimBlocks info_blocks(const Scenario& sc, const CovarianceSet& cov, const FimOptions& opts) {
  const int n_count = sc.num_targets();
  const int r_count = sc.num_receivers();
  const int k_count = sc.num_subcarriers;

  FimBlocks blocks;
  blocks.num_targets = n_count;
  blocks.num_receivers = r_count;
  blocks.num_subcarriers = k_count;
  blocks.convention = opts.convention;
  blocks.d.resize(static_cast<size_t>(n_count) * r_count * k_count * n_count);
  blocks.v.resize(blocks.d.size());
  blocks.beam_gain.resize(n_count * n_count, k_count);

  const Real df = sc.subcarrier_spacing_hz;
  const Real t_sym = opts.convention == PhaseConvention::literal ? sc.symbol_period_s()
                                                                 : sc.symbol_duration_s();
  const SymbolSums sums = symbol_sums(sc.num_symbols, opts.convention);

  // Carrier-wavelength steering towards each target.
  std::vector<CVec> beta(n_count);
  for (int n = 0; n < n_count; ++n) beta[n] = steering_vector(sc, 0, target_aod(sc, n));

  for (int n = 0; n < n_count; ++n)
    for (int np = 0; np < n_count; ++np)
      for (int k = 0; k < k_count; ++k)
        blocks.beam_gain(n * n_count + np, k) = pattern_gain(cov.covariance(k, np), beta[n]);

  for (int n = 0; n < n_count; ++n) {
    for (int r = 0; r < r_count; ++r) {
      const PathGeometry geo = geometry_partials(sc, n, r);
      const Real loss = radar_pathloss(sc, n, r);
      const Real pref = 8.0 * kPi * kPi * loss * loss / sc.radar_noise_var;
      const Mat2 tau_tau = outer(geo.delay_grad, geo.delay_grad);
      const Mat2 tau_f = outer(geo.delay_grad, geo.doppler_grad_pos) +
                         outer(geo.doppler_grad_pos, geo.delay_grad);
      const Mat2 f_f = outer(geo.doppler_grad_pos, geo.doppler_grad_pos);
      const Mat2 v_v = outer(geo.doppler_grad_vel, geo.doppler_grad_vel);
      for (int k = 0; k < k_count; ++k) {
        const Real kw = subcarrier_weight(k, df, opts.convention);
        const Mat2 d_geo = kw * kw * sums.count * tau_tau - kw * t_sym * sums.linear * tau_f +
                           t_sym * t_sym * sums.quadratic * f_f;
        const Mat2 v_geo = t_sym * t_sym * sums.quadratic * v_v;
        for (int np = 0; np < n_count; ++np) {
          const Real gain = blocks.beam_gain(n * n_count + np, k);
          const int i = blocks.idx(n, r, k, np);
          blocks.d[i] = pref * gain * d_geo;
          blocks.v[i] = pref * gain * v_geo;
        }
      }
    }
  }
  return blocks;
}

std::pair<Mat2, Mat2> info_block(const Scenario& sc, const CovarianceSet& cov, int n, int r,
                                 int k, int np, const FimOptions& opts) {
  const Real df = sc.subcarrier_spacing_hz;
  const Real t_sym = opts.convention == PhaseConvention::literal ? sc.symbol_period_s()
                                                                 : sc.symbol_duration_s();
  const SymbolSums sums = symbol_sums(sc.num_symbols, opts.convention);
  const PathGeometry geo = geometry_partials(sc, n, r);
  const Real loss = radar_pathloss(sc, n, r);
  const Real pref = 8.0 * kPi * kPi * loss * loss / sc.radar_noise_var;
  const CVec beta = steering_vector(sc, 0, target_aod(sc, n));
  const Real gain = pattern_gain(cov.covariance(k, np), beta);
  const Real kw = subcarrier_weight(k, df, opts.convention);

  const Mat2 d = pref * gain *
                 (kw * kw * sums.count * outer(geo.delay_grad, geo.delay_grad) -
                  kw * t_sym * sums.linear *
                      (outer(geo.delay_grad, geo.doppler_grad_pos) +
                       outer(geo.doppler_grad_pos, geo.delay_grad)) +
                  t_sym * t_sym * sums.quadratic *
                      outer(geo.doppler_grad_pos, geo.doppler_grad_pos));
  const Mat2 v = pref * gain * t_sym * t_sym * sums.quadratic *
                 outer(geo.doppler_grad_vel, geo.doppler_grad_vel);
  return {d, v};
}

std::vector<std::pair<Mat2, Mat2>> information_sums(const FimBlocks& blocks,
                                                    const MatX& radar_weight,
                                                    const std::vector<int>& mask) {
  if (radar_weight.rows() != blocks.num_subcarriers ||
      radar_weight.cols() != blocks.num_targets)
    throw ConfigError("information_sums: radar_weight must be K x N");
  if (static_cast<int>(mask.size()) != blocks.num_receivers)
    throw ConfigError("information_sums: mask must have one entry per receiver");

  std::vector<std::pair<Mat2, Mat2>> out(blocks.num_targets,
                                         {Mat2::Zero(), Mat2::Zero()});
  for (int n = 0; n < blocks.num_targets; ++n) {
    for (int r = 0; r < blocks.num_receivers; ++r) {
      if (mask[r] == 0) continue;
      for (int k = 0; k < blocks.num_subcarriers; ++k) {
        for (int np = 0; np < blocks.num_targets; ++np) {
          const Real w = radar_weight(k, np);
          if (w == 0) continue;
          out[n].first += w * blocks.location(n, r, k, np);
          out[n].second += w * blocks.velocity(n, r, k, np);
        }
      }
    }
  }
  return out;
}

std::vector<CrbPair> crb_matrices(const FimBlocks& blocks, const MatX& radar_weight,
                                  const std::vector<int>& mask) {
  bool any_active = false;
  for (int s : mask) any_active = any_active || s != 0;
  if (!any_active) throw NumericalError("crb_matrices: no active receiver");
  if (radar_weight.cwiseAbs().sum() <= 0)
    throw NumericalError("crb_matrices: no detection power allocated");

  const auto sums = information_sums(blocks, radar_weight, mask);
  std::vector<CrbPair> out(sums.size());
  for (size_t n = 0; n < sums.size(); ++n) {
    out[n].location = invert_information(sums[n].first, "location");
    out[n].velocity = invert_information(sums[n].second, "velocity");
  }
  return out;
}

MatX fim_numerical(const Scenario& sc, const MatX& radar_weight, const CovarianceSet& cov,
                   const std::vector<int>& mask, const FdSteps& steps, const FimOptions& opts) {
  const int n_count = sc.num_targets();
  const int r_count = sc.num_receivers();
  const int k_count = sc.num_subcarriers;
  const int l_count = sc.num_symbols;
  const int tx = sc.num_tx_antennas;
  const size_t entries = static_cast<size_t>(r_count) * k_count * l_count * tx;
  if (entries > 100000)
    throw ConfigError("fim_numerical: problem too large for the finite-difference oracle");

  const Real df = sc.subcarrier_spacing_hz;
  const Real t_sym = opts.convention == PhaseConvention::literal ? sc.symbol_period_s()
                                                                 : sc.symbol_duration_s();

  // Effective beam factors: sqrt of the power-weighted covariance mix per
  // subcarrier, so row inner products reproduce beta^H (sum w R) beta.
  std::vector<CMat> mix_sqrt(k_count);
  for (int k = 0; k < k_count; ++k) {
    CMat x = CMat::Zero(tx, tx);
    for (int np = 0; np < n_count; ++np) x += radar_weight(k, np) * cov.covariance(k, np);
    mix_sqrt[k] = matrix_sqrt(x);
  }

  std::vector<CVec> beta(n_count);
  std::vector<Real> loss(n_count * r_count);
  for (int n = 0; n < n_count; ++n) {
    beta[n] = steering_vector(sc, 0, target_aod(sc, n));
    for (int r = 0; r < r_count; ++r) loss[n * r_count + r] = radar_pathloss(sc, n, r);
  }

  // phi layout: for each n, [tau_{n,0..R-1}, f_{n,0..R-1}].
  const int params = 2 * r_count * n_count;
  VecX phi(params);
  for (int n = 0; n < n_count; ++n)
    for (int r = 0; r < r_count; ++r) {
      phi(2 * r_count * n + r) = bistatic_delay(sc, n, r);
      phi(2 * r_count * n + r_count + r) = bistatic_doppler(sc, n, r);
    }

  const auto mean_vector = [&](const VecX& p) -> CVec {
    CVec mu = CVec::Zero(entries);
    size_t pos = 0;
    for (int r = 0; r < r_count; ++r) {
      for (int k = 0; k < k_count; ++k) {
        std::vector<CVec> beam(n_count);
        for (int n = 0; n < n_count; ++n)
          beam[n] = mix_sqrt[k].adjoint() * beta[n];  // conj of beta^H * sqrt
        for (int l = 0; l < l_count; ++l) {
          CVec row = CVec::Zero(tx);
          if (mask[r] != 0) {
            for (int n = 0; n < n_count; ++n) {
              const Real tau = p(2 * r_count * n + r);
              const Real fd = p(2 * r_count * n + r_count + r);
              const Real phase =
                  2.0 * kPi * (symbol_index(l, opts.convention) * t_sym * fd -
                               subcarrier_weight(k, df, opts.convention) * tau);
              row += std::polar<Real>(loss[n * r_count + r], phase) * beam[n].conjugate();
            }
          }
          mu.segment(pos, tx) = row;
          pos += tx;
        }
      }
    }
    return mu;
  };

  // Central differences of the mean with respect to each (tau, f).
  CMat jac(entries, params);
  for (int a = 0; a < params; ++a) {
    const bool is_delay = (a % (2 * r_count)) < r_count;
    const Real h = is_delay ? steps.delay_s : steps.doppler_hz;
    if (h <= 0) throw NumericalError("fim_numerical: step size underflow");
    VecX hi = phi, lo = phi;
    hi(a) += h;
    lo(a) -= h;
    jac.col(a) = (mean_vector(hi) - mean_vector(lo)) / (2.0 * h);
  }

  const MatX f_phi = (2.0 / sc.radar_noise_var) * (jac.adjoint() * jac).real();

  // Analytic Jacobian d phi / d theta, block diagonal per target.
  MatX j = MatX::Zero(4 * n_count, params);
  for (int n = 0; n < n_count; ++n) {
    for (int r = 0; r < r_count; ++r) {
      const PathGeometry geo = geometry_partials(sc, n, r);
      const int ct = 2 * r_count * n + r;
      const int cf = 2 * r_count * n + r_count + r;
      j(4 * n + 0, ct) = geo.delay_grad(0);
      j(4 * n + 1, ct) = geo.delay_grad(1);
      j(4 * n + 0, cf) = geo.doppler_grad_pos(0);
      j(4 * n + 1, cf) = geo.doppler_grad_pos(1);
      j(4 * n + 2, cf) = geo.doppler_grad_vel(0);
      j(4 * n + 3, cf) = geo.doppler_grad_vel(1);
    }
  }
  return j * f_phi * j.transpose();
}

}  // namespace dfrc
