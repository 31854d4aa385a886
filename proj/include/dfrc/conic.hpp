#pragma once

#include <limits>
#include <string>
#include <vector>

#include "dfrc/types.hpp"

namespace dfrc::conic {

/// Sparse affine form sum_i c_i x_i + b.
struct LinExpr {
  std::vector<std::pair<int, Real>> terms;
  Real constant = 0;

  LinExpr() = default;
  explicit LinExpr(Real c) : constant(c) {}
  LinExpr& add(int var, Real coeff) {
    if (coeff != 0) terms.emplace_back(var, coeff);
    return *this;
  }
  Real eval(const VecX& x) const {
    Real v = constant;
    for (const auto& [i, c] : terms) v += c * x(i);
    return v;
  }
};

/// Rotated cone u*v >= w^2 with u, v >= 0; all three forms affine.
struct RotatedCone {
  LinExpr u, v, w;
};

/// Perspective rate term weight * sigma * log2(1 + gain * power / sigma).
/// sigma = -1 pins the denominator at 1 (a plain log term).
struct RateTerm {
  int sigma = -1;
  int power = -1;
  Real gain = 0;
  Real weight = 1.0;
};

/// Concave maximization over nonnegative (boxed) reals with linear
/// equalities, linear inequalities and rotated second-order cones.
struct Problem {
  int num_vars = 0;
  std::vector<std::string> names;
  VecX lower, upper;  // upper entries may be +inf

  std::vector<RateTerm> rates;
  VecX linear_objective;  // maximized together with the rate terms

  std::vector<LinExpr> eq;    // expr == 0
  std::vector<LinExpr> ineq;  // expr <= 0
  std::vector<RotatedCone> cones;
  std::vector<std::string> ineq_names;  // optional diagnostics
  std::vector<std::string> cone_names;

  /// Start point: must satisfy the equalities and lie strictly inside the
  /// bounds. Phase-I repairs inequality/cone violations from here.
  VecX start;

  int add_variable(std::string name, Real lo, Real hi = std::numeric_limits<Real>::infinity());
  Real objective_value(const VecX& x) const;
};

enum class SolveStatus { optimal, infeasible, max_iter };

struct Solution {
  SolveStatus status = SolveStatus::max_iter;
  VecX x;
  Real objective = 0;
  /// Barrier complementarity 1/t at exit together with primal residuals.
  Real kkt_residual = std::numeric_limits<Real>::infinity();
  int newton_steps = 0;
  std::string message;
};

struct Settings {
  Real tol = 1e-7;        // duality measure (barrier complementarity) target
  Real mu_factor = 10.0;  // outer barrier parameter growth
  Real t0 = 1.0;
  int max_newton = 5000;  // total Newton-step budget across both phases
  Real newton_tol = 1e-9; // centering stop on the decrement lambda^2/2
  int max_inner = 60;
  bool trace = false;
  std::string trace_path;
};

/// Barrier interior-point solve. Runs a slack-minimizing Phase-I when the
/// start violates an inequality or cone; status infeasible carries the name
/// of the worst constraint.
Solution solve(const Problem& problem, const Settings& settings = {});

/// Phase-I only: returns a strictly feasible point or infeasible status.
Solution phase1_feasibility(const Problem& problem, const Settings& settings = {});

/// sigma * log2(1 + gain * pbar / sigma), extended by continuity to 0 at
/// sigma <= 1e-12.
Real perspective_rate(Real sigma, Real pbar, Real gain);

/// 2x2 PSD test via the diagonal-and-determinant reduction.
bool psd2(Real m11, Real m12, Real m22);

/// Symmetric 2x2 matrix with affine entries.
struct AffineLmi2 {
  LinExpr m11, m12, m22;
};

/// Reduction of the 2x2 LMI M >= 0 to one rotated cone plus the two
/// diagonal sign conditions (as <= 0 inequality expressions).
struct RsocReduction {
  RotatedCone cone;
  LinExpr diag1_nonneg;  // -m11 <= 0
  LinExpr diag2_nonneg;  // -m22 <= 0
};

RsocReduction lmi_to_rsoc(const AffineLmi2& lmi);

}  // namespace dfrc::conic
