#include "dfrc/conic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dfrc::conic {

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();
constexpr Real kLog2 = 0.6931471805599453;

struct BarrierEval {
  bool in_domain = false;
  Real value = kInf;  // t * (-objective) + barrier
};

/// Shared evaluation/derivative machinery for one Problem instance.
class Barrier {
 public:
  Barrier(const Problem& p, const Settings& s) : p_(p), s_(s) {
    finite_lb_.reserve(p.num_vars);
    finite_ub_.reserve(p.num_vars);
    for (int i = 0; i < p.num_vars; ++i) {
      if (std::isfinite(p.lower(i))) finite_lb_.push_back(i);
      if (std::isfinite(p.upper(i))) finite_ub_.push_back(i);
    }
    degree_ = static_cast<Real>(finite_lb_.size() + finite_ub_.size() + p.ineq.size() +
                                2 * p.cones.size());
  }

  Real degree() const { return degree_; }
  Real objective(const VecX& x) const { return p_.objective_value(x); }

  BarrierEval eval(const VecX& x, Real t) const {
    BarrierEval e;
    Real barrier = 0;
    for (int i : finite_lb_) {
      const Real s = x(i) - p_.lower(i);
      if (s <= 0) return e;
      barrier -= std::log(s);
    }
    for (int i : finite_ub_) {
      const Real s = p_.upper(i) - x(i);
      if (s <= 0) return e;
      barrier -= std::log(s);
    }
    for (const auto& row : p_.ineq) {
      const Real s = -row.eval(x);
      if (s <= 0) return e;
      barrier -= std::log(s);
    }
    for (const auto& cone : p_.cones) {
      const Real u = cone.u.eval(x), v = cone.v.eval(x), w = cone.w.eval(x);
      const Real d = u * v - w * w;
      if (u <= 0 || v <= 0 || d <= 0) return e;
      barrier -= std::log(d);
    }
    e.in_domain = true;
    e.value = -t * p_.objective_value(x) + barrier;
    return e;
  }

  // Gradient and Hessian of t*(-objective) + barrier at x (x must be interior).
  void differentials(const VecX& x, Real t, VecX& grad, MatX& hess) const {
    const int n = p_.num_vars;
    grad.setZero(n);
    hess.setZero(n, n);

    grad -= t * p_.linear_objective;
    for (const auto& rt : p_.rates) {
      const Real c = rt.gain;
      const Real pw = x(rt.power);
      if (rt.sigma < 0) {
        const Real s = 1.0 + c * pw;
        grad(rt.power) -= t * rt.weight * c / (s * kLog2);
        hess(rt.power, rt.power) += t * rt.weight * c * c / (s * s * kLog2);
      } else {
        const Real sg = x(rt.sigma);
        const Real s = sg + c * pw;
        grad(rt.sigma) -= t * rt.weight * (std::log1p(c * pw / sg) - c * pw / s) / kLog2;
        grad(rt.power) -= t * rt.weight * c * sg / (s * kLog2);
        // Negated rate Hessian is the rank-1 form (c^2/(sigma s^2)) vv^T, v = (p, -sigma).
        const Real coef = t * rt.weight * c * c / (sg * s * s * kLog2);
        hess(rt.sigma, rt.sigma) += coef * pw * pw;
        hess(rt.sigma, rt.power) -= coef * pw * sg;
        hess(rt.power, rt.sigma) -= coef * pw * sg;
        hess(rt.power, rt.power) += coef * sg * sg;
      }
    }

    for (int i : finite_lb_) {
      const Real s = x(i) - p_.lower(i);
      grad(i) -= 1.0 / s;
      hess(i, i) += 1.0 / (s * s);
    }
    for (int i : finite_ub_) {
      const Real s = p_.upper(i) - x(i);
      grad(i) += 1.0 / s;
      hess(i, i) += 1.0 / (s * s);
    }
    for (const auto& row : p_.ineq) {
      const Real s = -row.eval(x);
      const Real gs = 1.0 / s;
      for (const auto& [i, ci] : row.terms) {
        grad(i) += ci * gs;
        for (const auto& [j, cj] : row.terms) hess(i, j) += ci * cj * gs * gs;
      }
    }
    for (const auto& cone : p_.cones) {
      const Real u = cone.u.eval(x), v = cone.v.eval(x), w = cone.w.eval(x);
      const Real d = u * v - w * w;
      const Vec3 g3{-v / d, -u / d, 2.0 * w / d};
      Mat3 h3 = g3 * g3.transpose();
      h3(0, 1) -= 1.0 / d;
      h3(1, 0) -= 1.0 / d;
      h3(2, 2) += 2.0 / d;
      const LinExpr* rows[3] = {&cone.u, &cone.v, &cone.w};
      for (int a = 0; a < 3; ++a) {
        for (const auto& [i, ci] : rows[a]->terms) {
          grad(i) += ci * g3(a);
          for (int b = 0; b < 3; ++b)
            for (const auto& [j, cj] : rows[b]->terms) hess(i, j) += ci * h3(a, b) * cj;
        }
      }
    }
  }

 private:
  using Vec3 = Eigen::Matrix<Real, 3, 1>;
  using Mat3 = Eigen::Matrix<Real, 3, 3>;
  const Problem& p_;
  const Settings& s_;
  std::vector<int> finite_lb_, finite_ub_;
  Real degree_ = 0;
};

MatX equality_matrix(const Problem& p) {
  MatX a = MatX::Zero(static_cast<int>(p.eq.size()), p.num_vars);
  for (size_t r = 0; r < p.eq.size(); ++r)
    for (const auto& [i, c] : p.eq[r].terms) a(static_cast<int>(r), i) += c;
  return a;
}

VecX equality_rhs(const Problem& p) {
  VecX b(static_cast<int>(p.eq.size()));
  for (size_t r = 0; r < p.eq.size(); ++r) b(static_cast<int>(r)) = -p.eq[r].constant;
  return b;
}

/// Orthogonal projection of x onto {A x = b}; fixes tiny drift in warm starts.
void project_onto_equalities(const MatX& a, const VecX& b, VecX& x) {
  if (a.rows() == 0) return;
  const VecX resid = a * x - b;
  if (resid.lpNorm<Eigen::Infinity>() < 1e-13) return;
  const MatX gram = a * a.transpose();
  x -= a.transpose() * gram.ldlt().solve(resid);
}

struct CenterResult {
  int steps = 0;
  Real decrement = kInf;
  bool hit_budget = false;
};

/// Damped Newton to the analytic center of t*(-obj) + barrier on {A x = b}.
CenterResult center(const Barrier& barrier, const MatX& eq_a, Real t, VecX& x,
                    const Settings& st, int& newton_budget, std::ofstream* trace,
                    int* trace_iter) {
  CenterResult res;
  VecX grad;
  MatX hess;
  for (int it = 0; it < st.max_inner; ++it) {
    if (newton_budget <= 0) {
      res.hit_budget = true;
      return res;
    }
    barrier.differentials(x, t, grad, hess);

    VecX dx;
    Real reg = 0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      MatX h = hess;
      if (reg > 0) h.diagonal().array() += reg;
      Eigen::LLT<MatX> llt(h);
      if (llt.info() != Eigen::Success) {
        reg = reg == 0 ? 1e-12 * (1.0 + hess.diagonal().maxCoeff()) : reg * 100;
        continue;
      }
      if (eq_a.rows() == 0) {
        dx = llt.solve(-grad);
      } else {
        const VecX hg = llt.solve(-grad);
        const MatX hat = llt.solve(eq_a.transpose());
        const MatX schur = eq_a * hat;
        const VecX nu = schur.ldlt().solve(eq_a * hg);
        dx = hg - hat * nu;
      }
      break;
    }
    if (dx.size() == 0) throw NumericalError("conic solve: Newton system factorization failed");

    const Real lambda2 = std::max<Real>(0.0, -grad.dot(dx));
    res.decrement = lambda2;
    if (trace && *trace_iter >= 0) {
      (*trace) << (*trace_iter)++ << ',' << t << ',' << barrier.objective(x) << ','
               << lambda2 << '\n';
    }
    // The centering potential scales with t, so the decrement target must too;
    // an absolute target sits below double resolution once t is large.
    if (lambda2 / 2.0 <= std::max(st.newton_tol, 1e-12 * t)) return res;

    const Real phi0 = barrier.eval(x, t).value;
    Real step = 1.0;
    bool accepted = false;
    VecX fallback;
    Real fallback_val = phi0;
    for (int ls = 0; ls < 60; ++ls) {
      const VecX cand = x + step * dx;
      const BarrierEval e = barrier.eval(cand, t);
      if (e.in_domain && e.value <= phi0 - 0.25 * step * lambda2) {
        x = cand;
        accepted = true;
        break;
      }
      if (e.in_domain && e.value < fallback_val) {
        fallback = cand;
        fallback_val = e.value;
      }
      step *= 0.5;
    }
    if (!accepted && fallback.size() > 0) {
      // Sufficient decrease is below fp resolution here; take plain decrease.
      x = fallback;
      accepted = true;
    }
    ++res.steps;
    --newton_budget;
    if (!accepted) return res;  // stalled; decrement reported as-is
  }
  return res;
}

Real worst_violation(const Problem& p, const VecX& x, int* worst_ineq, int* worst_cone) {
  Real worst = -kInf;
  if (worst_ineq) *worst_ineq = -1;
  if (worst_cone) *worst_cone = -1;
  for (size_t i = 0; i < p.ineq.size(); ++i) {
    const Real v = p.ineq[i].eval(x);
    if (v > worst) {
      worst = v;
      if (worst_ineq) *worst_ineq = static_cast<int>(i);
      if (worst_cone) *worst_cone = -1;
    }
  }
  for (size_t c = 0; c < p.cones.size(); ++c) {
    const Real u = p.cones[c].u.eval(x), v = p.cones[c].v.eval(x), w = p.cones[c].w.eval(x);
    // Violation proxy: how much slack zeta is needed so (u+z)(v+z) > w^2.
    const Real need = std::max({0.0, -u, -v}) + (u > 0 && v > 0 && u * v > w * w
                                                     ? 0.0
                                                     : std::abs(w) + 1e-6);
    if (need > worst) {
      worst = need;
      if (worst_ineq) *worst_ineq = -1;
      if (worst_cone) *worst_cone = static_cast<int>(c);
    }
  }
  return worst;
}

bool strictly_feasible(const Problem& p, const VecX& x, Real margin) {
  for (const auto& row : p.ineq)
    if (row.eval(x) > -margin) return false;
  for (const auto& cone : p.cones) {
    const Real u = cone.u.eval(x), v = cone.v.eval(x), w = cone.w.eval(x);
    if (u <= margin || v <= margin || u * v - w * w <= margin * (1.0 + std::abs(u * v)))
      return false;
  }
  return true;
}

/// Relaxed copy of the problem with one slack variable added to every
/// inequality and cone leg; objective is to drive the slack negative.
/// Variables without a finite box get a generous temporary one: with only
/// the slack in the objective, the log barrier alone is unbounded below
/// along any free ray.
Problem make_phase1(const Problem& p, const VecX& x0, Real* zeta0) {
  Problem ph = p;
  ph.rates.clear();
  for (int i = 0; i < ph.num_vars; ++i) {
    const Real scale = 1e6 * (1.0 + std::abs(x0(i)));
    if (!std::isfinite(ph.upper(i))) ph.upper(i) = x0(i) + scale;
    if (!std::isfinite(ph.lower(i))) ph.lower(i) = x0(i) - scale;
  }
  const int z = ph.add_variable("phase1_slack", -kInf, kInf);
  ph.linear_objective = VecX::Zero(ph.num_vars);
  ph.linear_objective(z) = -1.0;
  for (auto& row : ph.ineq) row.add(z, -1.0);
  for (auto& cone : ph.cones) {
    cone.u.add(z, 1.0);
    cone.v.add(z, 1.0);
  }

  Real need = 0;
  for (const auto& row : p.ineq) need = std::max(need, row.eval(x0));
  for (const auto& cone : p.cones) {
    const Real u = cone.u.eval(x0), v = cone.v.eval(x0), w = cone.w.eval(x0);
    need = std::max(need, std::max(-u, -v) + std::abs(w));
  }
  *zeta0 = need + 1.0;
  ph.lower.conservativeResize(ph.num_vars);
  ph.upper.conservativeResize(ph.num_vars);
  ph.lower(z) = -1e3 * (*zeta0);
  ph.upper(z) = 2.0 * (*zeta0) + 10.0;
  ph.start = VecX(ph.num_vars);
  ph.start.head(p.num_vars) = x0;
  ph.start(z) = *zeta0;
  return ph;
}

std::string constraint_name(const Problem& p, int ineq_idx, int cone_idx) {
  if (ineq_idx >= 0)
    return ineq_idx < static_cast<int>(p.ineq_names.size())
               ? p.ineq_names[ineq_idx]
               : "inequality " + std::to_string(ineq_idx);
  if (cone_idx >= 0)
    return cone_idx < static_cast<int>(p.cone_names.size())
               ? p.cone_names[cone_idx]
               : "cone " + std::to_string(cone_idx);
  return "none";
}

}  // namespace

int Problem::add_variable(std::string name, Real lo, Real hi) {
  const int id = num_vars++;
  names.push_back(std::move(name));
  lower.conservativeResize(num_vars);
  upper.conservativeResize(num_vars);
  lower(id) = lo;
  upper(id) = hi;
  linear_objective.conservativeResize(num_vars);
  linear_objective(num_vars - 1) = 0;
  return id;
}

Real Problem::objective_value(const VecX& x) const {
  Real v = linear_objective.size() == x.size() ? linear_objective.dot(x) : 0.0;
  for (const auto& rt : rates) {
    const Real sg = rt.sigma < 0 ? 1.0 : x(rt.sigma);
    v += rt.weight * perspective_rate(sg, x(rt.power), rt.gain);
  }
  return v;
}

Real perspective_rate(Real sigma, Real pbar, Real gain) {
  if (sigma <= 1e-12) return 0.0;
  return sigma * std::log2(1.0 + gain * pbar / sigma);
}

bool psd2(Real m11, Real m12, Real m22) {
  return m11 >= 0 && m22 >= 0 && m11 * m22 >= m12 * m12;
}

RsocReduction lmi_to_rsoc(const AffineLmi2& lmi) {
  RsocReduction red;
  red.cone.u = lmi.m11;
  red.cone.v = lmi.m22;
  red.cone.w = lmi.m12;
  red.diag1_nonneg = lmi.m11;
  red.diag2_nonneg = lmi.m22;
  for (auto& [i, c] : red.diag1_nonneg.terms) c = -c;
  red.diag1_nonneg.constant = -red.diag1_nonneg.constant;
  for (auto& [i, c] : red.diag2_nonneg.terms) c = -c;
  red.diag2_nonneg.constant = -red.diag2_nonneg.constant;
  return red;
}

Solution solve(const Problem& problem, const Settings& settings) {
  if (problem.num_vars == 0) {
    Solution empty;
    empty.status = SolveStatus::optimal;
    empty.x = VecX();
    empty.objective = 0;
    empty.kkt_residual = 0;
    return empty;
  }
  if (problem.start.size() != problem.num_vars)
    throw ConfigError("conic solve: start point required (size mismatch)");
  if (problem.linear_objective.size() != problem.num_vars)
    throw ConfigError("conic solve: linear objective size mismatch");

  const MatX eq_a = equality_matrix(problem);
  const VecX eq_b = equality_rhs(problem);

  VecX x = problem.start;
  project_onto_equalities(eq_a, eq_b, x);
  for (int i = 0; i < problem.num_vars; ++i)
    if (!(x(i) > problem.lower(i) && x(i) < problem.upper(i)))
      throw ConfigError("conic solve: start must lie strictly inside the bounds (variable " +
                        (i < static_cast<int>(problem.names.size()) ? problem.names[i]
                                                                    : std::to_string(i)) +
                        ")");

  Solution sol;
  sol.x = x;
  int budget = settings.max_newton;

  std::ofstream trace;
  int trace_iter = -1;
  if (settings.trace && !settings.trace_path.empty()) {
    trace.open(settings.trace_path);
    trace << "iteration,t,objective,decrement\n";
    trace_iter = 0;
  }
  std::ofstream* trace_ptr = trace.is_open() ? &trace : nullptr;

  // Phase I: push a common slack below zero if the start is not interior.
  if (!strictly_feasible(problem, x, 1e-12)) {
    Real zeta0 = 0;
    Problem ph = make_phase1(problem, x, &zeta0);
    const Barrier barrier(ph, settings);
    const MatX ph_a = equality_matrix(ph);
    VecX y = ph.start;
    Real t = std::max<Real>(1.0, 1.0 / (1.0 + std::abs(zeta0)));
    const int zi = ph.num_vars - 1;
    bool found = false;
    while (budget > 0) {
      center(barrier, ph_a, t, y, settings, budget, nullptr, &trace_iter);
      if (y(zi) < -1e-9 && strictly_feasible(problem, y.head(problem.num_vars), 1e-13)) {
        found = true;
        break;
      }
      if (barrier.degree() / t <= std::min<Real>(settings.tol, 1e-9) * (1.0 + std::abs(zeta0)))
        break;
      t *= settings.mu_factor;
    }
    if (!found) {
      int wi = -1, wc = -1;
      worst_violation(problem, y.head(problem.num_vars), &wi, &wc);
      sol.status = SolveStatus::infeasible;
      sol.newton_steps = settings.max_newton - budget;
      sol.message = "infeasible: phase-I slack stalled at " + std::to_string(y(zi)) +
                    " (worst constraint: " + constraint_name(problem, wi, wc) + ")";
      sol.x = y.head(problem.num_vars);
      sol.objective = problem.objective_value(sol.x);
      return sol;
    }
    x = y.head(problem.num_vars);
    project_onto_equalities(eq_a, eq_b, x);
  }

  // Main barrier path.
  const Barrier barrier(problem, settings);
  Real t = settings.t0;
  Real decrement = 0;
  bool budget_hit = false;
  if (barrier.degree() == 0) {
    // No inequality structure at all: a single Newton solve maximizes the
    // concave objective over the equalities.
    const CenterResult r =
        center(barrier, eq_a, 1.0, x, settings, budget, trace_ptr, &trace_iter);
    decrement = r.decrement;
    t = kInf;
  } else {
    while (true) {
      const CenterResult r =
          center(barrier, eq_a, t, x, settings, budget, trace_ptr, &trace_iter);
      decrement = r.decrement;
      if (1.0 / t <= settings.tol) break;
      if (budget <= 0 || r.hit_budget) {
        budget_hit = true;
        break;
      }
      t *= settings.mu_factor;
    }
  }

  sol.x = x;
  sol.objective = problem.objective_value(x);
  sol.newton_steps = settings.max_newton - budget;

  Real eq_res = 0;
  if (eq_a.rows() > 0) eq_res = (eq_a * x - eq_b).lpNorm<Eigen::Infinity>();
  Real viol = std::max<Real>(0.0, worst_violation(problem, x, nullptr, nullptr));
  const Real comp = std::isinf(t) ? 0.0 : 1.0 / t;
  const Real stationarity = std::isinf(t) ? decrement : decrement / std::max<Real>(1.0, t);
  sol.kkt_residual = std::max({comp, eq_res, viol, stationarity});
  sol.status = (!budget_hit && sol.kkt_residual <= settings.tol) ? SolveStatus::optimal
                                                                 : SolveStatus::max_iter;
  if (sol.status == SolveStatus::max_iter)
    sol.message = budget_hit ? "newton budget exhausted" : "kkt residual above tolerance";
  return sol;
}

Solution phase1_feasibility(const Problem& problem, const Settings& settings) {
  Problem probe = problem;
  probe.rates.clear();
  probe.linear_objective = VecX::Zero(probe.num_vars);
  return solve(probe, settings);
}

}  // namespace dfrc::conic
