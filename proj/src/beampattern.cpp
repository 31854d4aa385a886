#include "dfrc/beampattern.hpp"

#include <algorithm>
#include <cmath>

namespace dfrc {

namespace {

// Pattern gains g_q = a_q^H R a_q for all grid angles, steering vectors as columns of A.
VecX grid_gains(const CMat& steer, const CMat& r) {
  const CMat rb = r * steer;
  return steer.conjugate().cwiseProduct(rb).colwise().sum().real().transpose();
}

// Eigenvalue clip to the PSD cone followed by an exact diagonal reset to
// 1/T_x via congruence scaling, which keeps the matrix PSD.
CMat project_constraints(const CMat& m) {
  const int tx = static_cast<int>(m.rows());
  CMat h = Real(0.5) * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> eig(h);
  VecX ev = eig.eigenvalues().cwiseMax(0.0);
  h = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().adjoint();

  const Real want = 1.0 / static_cast<Real>(tx);
  VecX d = h.diagonal().real();
  for (int i = 0; i < tx; ++i) {
    if (d(i) < 1e-14) {
      // zero diagonal of a PSD matrix implies a zero row; just pin the diagonal
      h.row(i).setZero();
      h.col(i).setZero();
      h(i, i) = want;
    }
  }
  d = h.diagonal().real();
  VecX s(tx);
  for (int i = 0; i < tx; ++i) s(i) = std::sqrt(want / d(i));
  h = s.asDiagonal() * h * s.asDiagonal();
  h = Real(0.5) * (h + h.adjoint());
  h.diagonal() = VecX::Constant(tx, want).cast<Complex>();
  return h;
}

Real fit_scale(const VecX& desired, const VecX& gains) {
  const Real denom = desired.squaredNorm();
  if (denom <= 0) return 0.0;
  return std::max<Real>(0.0, desired.dot(gains) / denom);
}

Real objective_value(const VecX& desired, const VecX& gains, Real scale) {
  return (scale * desired - gains).squaredNorm();
}

}  // namespace

PatternSpec PatternSpec::box(const AngleInterval& subarea, int num_samples) {
  PatternSpec spec;
  spec.sample_angles_rad.resize(num_samples);
  spec.desired.resize(num_samples);
  for (int q = 0; q < num_samples; ++q) {
    const Real deg = -90.0 + 180.0 * static_cast<Real>(q) / static_cast<Real>(num_samples - 1);
    spec.sample_angles_rad(q) = deg2rad(deg);
    spec.desired(q) = subarea.contains_deg(deg) ? 1.0 : 0.0;
  }
  return spec;
}

DesignResult design_covariance(const PatternSpec& spec, Real wavelength_m, Real spacing_m,
                               int num_antennas, const DesignOptions& opts) {
  const int q_count = static_cast<int>(spec.sample_angles_rad.size());
  if (q_count < 2 * num_antennas)
    throw ConfigError("pattern grid needs at least 2*T_x sample angles");
  for (int q = 1; q < q_count; ++q)
    if (!(spec.sample_angles_rad(q) > spec.sample_angles_rad(q - 1)))
      throw ConfigError("pattern grid must be strictly increasing");

  // Normalizing the desired pattern makes runs with gamma*P follow the exact
  // same iterate path; the fitted scale is mapped back at the end.
  const Real pattern_peak = spec.desired.maxCoeff();
  const VecX desired = pattern_peak > 0 ? VecX(spec.desired / pattern_peak) : spec.desired;

  CMat steer(num_antennas, q_count);
  for (int q = 0; q < q_count; ++q)
    steer.col(q) = steering_vector(wavelength_m, spacing_m, spec.sample_angles_rad(q),
                                   num_antennas);

  const Real tx = static_cast<Real>(num_antennas);
  CMat r = CMat::Identity(num_antennas, num_antennas) / tx;
  VecX gains = grid_gains(steer, r);
  Real scale = fit_scale(desired, gains);
  Real obj = objective_value(desired, gains, scale);

  Real step = 1.0 / (2.0 * static_cast<Real>(q_count) * tx * tx);
  Real window_start_obj = obj;
  DesignResult best{r, scale, obj, false, 0};

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    scale = fit_scale(desired, gains);
    obj = objective_value(desired, gains, scale);

    const VecX residual = gains - scale * desired;
    const CMat grad = steer * (2.0 * residual).asDiagonal() * steer.adjoint();

    bool improved = false;
    for (int half = 0; half < 30; ++half) {
      const CMat cand = project_constraints(r - step * grad);
      const VecX cand_gains = grid_gains(steer, cand);
      const Real cand_scale = fit_scale(desired, cand_gains);
      const Real cand_obj = objective_value(desired, cand_gains, cand_scale);
      if (cand_obj <= obj) {
        r = cand;
        gains = cand_gains;
        scale = cand_scale;
        obj = cand_obj;
        step *= 1.2;
        improved = true;
        break;
      }
      step *= 0.5;
    }

    if (obj < best.objective) best = DesignResult{r, scale, obj, false, it + 1};

    if ((it + 1) % opts.stall_window == 0) {
      if (window_start_obj - obj < opts.tol) {
        best.converged = true;
        break;
      }
      window_start_obj = obj;
    }
    if (!improved && obj <= opts.tol) {
      best.converged = true;
      break;
    }
  }
  best.iterations = it + 1;
  // Report scale and objective in the caller's pattern units.
  const VecX final_gains = grid_gains(steer, best.covariance);
  best.scale = fit_scale(spec.desired, final_gains);
  best.objective = objective_value(spec.desired, final_gains, best.scale);
  return best;
}

DesignResult design_covariance(const PatternSpec& spec, const Scenario& sc, int k,
                               const DesignOptions& opts) {
  return design_covariance(spec, sc.wavelength_m(k), sc.antenna_spacing_m(),
                           sc.num_tx_antennas, opts);
}

CMat matrix_sqrt(const CMat& r) {
  CMat h = Real(0.5) * (r + r.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> eig(h);
  VecX ev = eig.eigenvalues();
  if (ev.minCoeff() < -1e-10)
    throw NumericalError("matrix_sqrt: input is significantly indefinite (min eigenvalue " +
                         std::to_string(ev.minCoeff()) + ")");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().adjoint();
}

Real pattern_gain(const CMat& r, const CVec& steer) {
  const Complex g = steer.dot(r * steer);  // Eigen's dot conjugates the left argument
  return g.real();
}

CovarianceSet design_covariance_set(const Scenario& sc, bool per_subcarrier,
                                    const DesignOptions& opts, int num_samples) {
  CovarianceSet set;
  set.num_subcarriers = sc.num_subcarriers;
  set.num_subareas = static_cast<int>(sc.detection_subareas.size());
  set.num_antennas = sc.num_tx_antennas;
  const int total = set.num_subcarriers * set.num_subareas;
  set.r.resize(total);
  set.omega.resize(total);
  set.scale.resize(total);
  set.objective.resize(total);

  for (int n = 0; n < set.num_subareas; ++n) {
    const PatternSpec spec = PatternSpec::box(sc.detection_subareas[n], num_samples);
    DesignResult carrier = design_covariance(spec, sc, 0, opts);
    CMat carrier_sqrt = matrix_sqrt(carrier.covariance);
    for (int k = 0; k < set.num_subcarriers; ++k) {
      DesignResult res = (per_subcarrier && k > 0) ? design_covariance(spec, sc, k, opts)
                                                   : carrier;
      const int i = set.idx(k, n);
      set.r[i] = res.covariance;
      set.omega[i] = (per_subcarrier && k > 0) ? matrix_sqrt(res.covariance) : carrier_sqrt;
      set.scale(i) = res.scale;
      set.objective(i) = res.objective;
      set.all_converged = set.all_converged && res.converged;
    }
  }
  return set;
}

std::vector<AngleInterval> equal_subareas(int n) {
  std::vector<AngleInterval> out;
  const Real width = 60.0 / static_cast<Real>(n);
  for (int i = 0; i < n; ++i)
    out.push_back({width * static_cast<Real>(i), width * static_cast<Real>(i + 1)});
  return out;
}

}  // namespace dfrc
