#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ripvisc/discretization.hpp"
#include "ripvisc/errors.hpp"
#include "ripvisc/smoothed_abs.hpp"
#include "ripvisc/tridiagonal.hpp"

namespace ripvisc {

/// Tolerance on sup|g(0)| <= 1.
inline constexpr double kCompatibilityTol = 1e-12;

/// Viscous-regularized forward problem: grids, smoothing and Newton settings.
struct RegStateProblem {
  SpatialGrid grid;
  TimeGrid tg;
  SmoothedAbs sabs;
  double newton_tol = 1e-11;
  std::size_t newton_max_iter = 200;

  RegStateProblem(SpatialGrid grid_, TimeGrid tg_, SmoothedAbs sabs_, double tol = 1e-11,
                  std::size_t max_iter = 200)
      : grid(std::move(grid_)), tg(tg_), sabs(sabs_), newton_tol(tol), newton_max_iter(max_iter) {
    require(newton_tol > 0.0, "RegStateProblem: newton_tol must be positive");
    require(newton_max_iter > 0, "RegStateProblem: newton_max_iter must be positive");
  }

  [[nodiscard]] double rho() const { return sabs.rho(); }
  [[nodiscard]] RegStateProblem with_rho(double rho) const {
    return RegStateProblem(grid, tg, SmoothedAbs(rho), newton_tol, newton_max_iter);
  }
};

/// Unregularized (rate-independent) forward problem solved by primal-dual active sets.
struct RISolveProblem {
  SpatialGrid grid;
  TimeGrid tg;
  double pdas_c = 1.0;
  std::size_t pdas_max_iter = 100;
  std::size_t pdas_max_retries = 4;

  RISolveProblem(SpatialGrid grid_, TimeGrid tg_, double c = 1.0, std::size_t max_iter = 100)
      : grid(std::move(grid_)), tg(tg_), pdas_c(c), pdas_max_iter(max_iter) {
    require(pdas_c > 0.0, "RISolveProblem: pdas_c must be positive");
    require(pdas_max_iter > 0, "RISolveProblem: pdas_max_iter must be positive");
  }
};

/// State of the regularized evolution.
/// rates[0] is the initial rate T_rho(g(0)); rates[k] for k >= 1 is the
/// implicit-Euler rate (z_k - z_{k-1}) / tau of the step ending at t_k.
struct RegularizedSolution {
  Trajectory z;
  Trajectory rates;
};

/// State of the rate-independent evolution with its driving force
/// lambda_k = L z_k + g_k, which stays in [-1, 1] nodewise.
struct RateIndependentSolution {
  Trajectory z;
  Trajectory lambda;
};

namespace detail {

inline SymTridiagonal scaled_neg_laplacian(const SpatialGrid& grid, double visc) {
  SymTridiagonal a = grid.neg_laplacian();
  a.diag *= visc;
  a.off *= visc;
  return a;
}

/// Rate-step operator -(visc) L + diag(second(w)) shared by the linearized and adjoint sweeps.
inline SymTridiagonal rate_jacobian(const SpatialGrid& grid, const SmoothedAbs& sabs, double visc,
                                    const Field& w) {
  SymTridiagonal a = scaled_neg_laplacian(grid, visc);
  for (Eigen::Index i = 0; i < w.size(); ++i) a.diag[i] += sabs.second(w[i]);
  return a;
}

inline Field first_of(const SmoothedAbs& sabs, const Field& w) {
  Field out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) out[i] = sabs.first(w[i]);
  return out;
}

inline double rate_energy(const SymTridiagonal& stiffness, const SmoothedAbs& sabs, const Field& v,
                          const Field& w) {
  double e = 0.5 * stiffness.apply(w).dot(w) - v.dot(w);
  for (Eigen::Index i = 0; i < w.size(); ++i) e += sabs.value(w[i]);
  return e;
}

inline bool try_newton(const RegStateProblem& prob, const SmoothedAbs& sabs, const Field& v, double visc,
                       Field& w) {
  const SymTridiagonal stiffness = scaled_neg_laplacian(prob.grid, visc);
  const auto residual = [&](const Field& x) -> Field {
    return stiffness.apply(x) + first_of(sabs, x) - v;
  };
  constexpr double sigma = 1e-4;

  Field r = residual(w);
  double rnorm = r.lpNorm<Eigen::Infinity>();
  for (std::size_t it = 0; it < prob.newton_max_iter; ++it) {
    if (rnorm <= prob.newton_tol) return true;
    const Field d = -solve_tridiagonal(rate_jacobian(prob.grid, sabs, visc, w), r);
    const double e0 = rate_energy(stiffness, sabs, v, w);
    const double slope = r.dot(d);
    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      Field trial = w + t * d;
      Field r_trial = residual(trial);
      const double rn_trial = r_trial.lpNorm<Eigen::Infinity>();
      const bool armijo = rate_energy(stiffness, sabs, v, trial) <= e0 + sigma * t * slope;
      if (armijo || rn_trial <= (1.0 - 0.5 * t) * rnorm) {
        w = std::move(trial);
        r = std::move(r_trial);
        rnorm = rn_trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) return false;
  }
  return rnorm <= prob.newton_tol;
}

}  // namespace detail

/**
 * @brief Solves -(rho + extra_visc) L w + first(w) = v nodewise.
 *
 * Damped Newton on the strongly convex rate energy; `guess` is used as the
 * starting point. If that fails the solve restarts from zero, and then falls
 * back to a homotopy that shrinks the smoothing width from 1 down to rho.
 */
inline Field t_rho_solve(const RegStateProblem& prob, const Field& v, double extra_visc,
                         const Field* guess = nullptr) {
  prob.grid.check(v, "t_rho_solve");
  require(extra_visc >= 0.0, "t_rho_solve: extra_visc must be nonnegative");
  const double visc = prob.rho() + extra_visc;
  Field w = guess != nullptr ? *guess : prob.grid.zeros();
  if (guess != nullptr && detail::try_newton(prob, prob.sabs, v, visc, w)) return w;
  w = prob.grid.zeros();
  if (detail::try_newton(prob, prob.sabs, v, visc, w)) return w;
  // small widths make the curvature jump by 2/rho across the kink, and plain
  // Newton can cycle there; walking rho down keeps each start in the basin
  w = prob.grid.zeros();
  bool ok = true;
  for (double r = std::max(1.0, prob.rho()); ok; r = std::max(0.1 * r, prob.rho())) {
    ok = detail::try_newton(prob, SmoothedAbs(r), v, visc, w);
    if (r == prob.rho()) break;
  }
  if (ok) return w;
  throw NewtonDivergence("t_rho_solve: no convergence within " + std::to_string(prob.newton_max_iter) +
                         " iterations (rho=" + std::to_string(prob.rho()) + ")");
}

inline void check_compatibility(const Trajectory& g) {
  const double g0 = g[0].size() > 0 ? g[0].cwiseAbs().maxCoeff() : 0.0;
  if (g0 > 1.0 + kCompatibilityTol)
    throw CompatibilityViolation("initial load violates sup|g(0)| <= 1 (got " + std::to_string(g0) + ")");
}

/// Fully implicit Euler for the viscous evolution with z(0) = 0.
inline RegularizedSolution solve_regularized(const RegStateProblem& prob, const Trajectory& g) {
  g.check(prob.tg, prob.grid, "solve_regularized");
  check_compatibility(g);
  const double tau = prob.tg.tau();
  RegularizedSolution sol{Trajectory(prob.tg, prob.grid), Trajectory(prob.tg, prob.grid)};
  sol.rates[0] = t_rho_solve(prob, g[0], 0.0);
  for (std::size_t k = 0; k < prob.tg.n_steps(); ++k) {
    const Field v = laplacian_apply(prob.grid, sol.z[k]) + g[k + 1];
    sol.rates[k + 1] = t_rho_solve(prob, v, tau, &sol.rates[k]);
    sol.z[k + 1] = sol.z[k] + tau * sol.rates[k + 1];
  }
  return sol;
}

/// Derivative of solve_regularized at the solution `sol` in direction h.
inline Trajectory solve_linearized(const RegStateProblem& prob, const RegularizedSolution& sol,
                                   const Trajectory& h) {
  h.check(prob.tg, prob.grid, "solve_linearized");
  sol.rates.check(prob.tg, prob.grid, "solve_linearized");
  const double tau = prob.tg.tau();
  Trajectory zeta(prob.tg, prob.grid);
  for (std::size_t k = 0; k < prob.tg.n_steps(); ++k) {
    const Field rhs = laplacian_apply(prob.grid, zeta[k]) + h[k + 1];
    const Field omega =
        solve_tridiagonal(detail::rate_jacobian(prob.grid, prob.sabs, prob.rho() + tau, sol.rates[k + 1]), rhs);
    zeta[k + 1] = zeta[k] + tau * omega;
  }
  return zeta;
}

namespace detail {

/// One implicit step of the rate-independent evolution:
/// find v with lambda = b + L v in [-1, 1] and v_i > 0 => lambda_i = 1, v_i < 0 => lambda_i = -1.
/// `state` holds the active set (+1, -1, 0) and is used as warm start.
inline bool pdas_step(const SpatialGrid& grid, const Field& b, double c, std::size_t max_iter,
                      std::vector<std::int8_t>& state, Field& v, Field& lambda) {
  const Eigen::Index n = grid.size();
  const double inv_h2 = 1.0 / (grid.h() * grid.h());
  for (std::size_t it = 0; it < max_iter; ++it) {
    SymTridiagonal sub{Eigen::VectorXd::Constant(n, 1.0), Eigen::VectorXd::Zero(n - 1)};
    Field rhs = Field::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[i] == 0) continue;
      sub.diag[i] = 2.0 * inv_h2;
      rhs[i] = b[i] - state[i];
      if (i + 1 < n && state[i + 1] != 0) sub.off[i] = -inv_h2;
    }
    v = solve_tridiagonal(sub, rhs);
    for (Eigen::Index i = 0; i < n; ++i)
      if (state[i] == 0) v[i] = 0.0;
    lambda = b + laplacian_apply(grid, v);
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[i] != 0) lambda[i] = state[i];
      const double pred = lambda[i] + c * v[i];
      const std::int8_t s = pred > 1.0 ? 1 : (pred < -1.0 ? -1 : 0);
      if (s != state[i]) {
        state[i] = s;
        changed = true;
      }
    }
    if (!changed) return true;
  }
  return false;
}

}  // namespace detail

/// Implicit Euler for the rate-independent evolution, one PDAS solve per step.
inline RateIndependentSolution solve_rate_independent(const RISolveProblem& prob, const Trajectory& g) {
  g.check(prob.tg, prob.grid, "solve_rate_independent");
  check_compatibility(g);
  const Eigen::Index n = prob.grid.size();
  RateIndependentSolution sol{Trajectory(prob.tg, prob.grid), Trajectory(prob.tg, prob.grid)};
  sol.lambda[0] = g[0];
  std::vector<std::int8_t> state(static_cast<std::size_t>(n), 0);
  for (std::size_t k = 0; k < prob.tg.n_steps(); ++k) {
    const Field b = laplacian_apply(prob.grid, sol.z[k]) + g[k + 1];
    Field v;
    Field lambda;
    double c = prob.pdas_c;
    bool ok = false;
    std::vector<std::int8_t> trial = state;
    for (std::size_t retry = 0; retry <= prob.pdas_max_retries && !ok; ++retry, c *= 10.0) {
      ok = detail::pdas_step(prob.grid, b, c, prob.pdas_max_iter, trial, v, lambda);
      if (!ok) std::fill(trial.begin(), trial.end(), std::int8_t{0});
    }
    if (!ok) throw PdasCycle("solve_rate_independent: active sets cycle at step " + std::to_string(k));
    state = std::move(trial);
    sol.z[k + 1] = sol.z[k] + v;
    sol.lambda[k + 1] = lambda;
  }
  return sol;
}

}  // namespace ripvisc
