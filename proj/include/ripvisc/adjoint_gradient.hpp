#pragma once

#include <cmath>
#include <cstddef>

#include "ripvisc/discretization.hpp"
#include "ripvisc/errors.hpp"
#include "ripvisc/state_solvers.hpp"
#include "ripvisc/tridiagonal.hpp"

namespace ripvisc {

/**
 * @brief Quadratic tracking objective
 *
 *   j1(z) = alpha/2 * int_I ||z - z_d||^2_{L2} dt   (left-rectangle rule)
 *   j2(v) = beta/2  * ||v - z_T||^2_{L2}
 *
 * plus the control cost 1/2 ||g||^2_{H^1_*(I;L2)}.
 */
struct ObjectiveSpec {
  double alpha = 0.0;
  double beta = 0.0;
  Trajectory z_d;
  Field z_T;

  /// Zero targets on the given grids.
  static ObjectiveSpec zero_targets(const TimeGrid& tg, const SpatialGrid& grid, double alpha, double beta) {
    return ObjectiveSpec{alpha, beta, Trajectory(tg, grid), grid.zeros()};
  }

  void check(const TimeGrid& tg, const SpatialGrid& grid) const {
    require(std::isfinite(alpha) && alpha >= 0.0, "ObjectiveSpec: alpha must be finite and >= 0");
    require(std::isfinite(beta) && beta >= 0.0, "ObjectiveSpec: beta must be finite and >= 0");
    z_d.check(tg, grid, "ObjectiveSpec::z_d");
    grid.check(z_T, "ObjectiveSpec::z_T");
  }
};

/// Adjoint state. q[k] lives at every node; xi[k] solves
/// -(rho + tau) L xi_k + second(rates_k) xi_k = q_k for k >= 1, and the
/// same relation with viscosity rho alone at k = 0.
struct AdjointPair {
  Trajectory q;
  Trajectory xi;
};

inline void require_h1star(const Trajectory& g, const char* who) {
  if (g.size() == 0 || g[0].size() == 0) return;
  if (g[0].cwiseAbs().maxCoeff() != 0.0) throw ContractViolation(std::string(who) + ": control must vanish at t = 0");
}

/// Tracking part j1(z) + j2(z(T)).
inline double tracking_value(const TimeGrid& tg, const SpatialGrid& grid, const ObjectiveSpec& spec,
                             const Trajectory& z) {
  double j1 = 0.0;
  if (spec.alpha != 0.0) {
    for (std::size_t k = 0; k < tg.n_steps(); ++k) {
      const Field d = z[k] - spec.z_d[k];
      j1 += tg.tau() * inner_l2(grid, d, d);
    }
  }
  const Field dT = z.back() - spec.z_T;
  return 0.5 * spec.alpha * j1 + 0.5 * spec.beta * inner_l2(grid, dT, dT);
}

/// J(z, g) + prox_weight/2 ||g - anchor||^2_{H^1_*}.
inline double objective_value(const TimeGrid& tg, const SpatialGrid& grid, const ObjectiveSpec& spec,
                              const Trajectory& z, const Trajectory& g, const Trajectory& g_anchor,
                              double prox_weight) {
  spec.check(tg, grid);
  z.check(tg, grid, "objective_value");
  g.check(tg, grid, "objective_value");
  require_h1star(g, "objective_value");
  double value = tracking_value(tg, grid, spec, z) + 0.5 * h1star_inner(tg, grid, g, g);
  if (prox_weight != 0.0) {
    g_anchor.check(tg, grid, "objective_value");
    const Trajectory d = g - g_anchor;
    value += 0.5 * prox_weight * h1star_inner(tg, grid, d, d);
  }
  return value;
}

/**
 * @brief Backward sweep of the discrete adjoint system.
 *
 * This is the exact transpose of the implicit-Euler forward step, so
 * sum_{k>=1} tau <xi_k, h_k>_{L2} equals the derivative of j1 + j2 along
 * solve_linearized(h).
 */
inline AdjointPair solve_adjoint(const RegStateProblem& prob, const ObjectiveSpec& spec,
                                 const RegularizedSolution& sol) {
  const auto& tg = prob.tg;
  const auto& grid = prob.grid;
  spec.check(tg, grid);
  sol.z.check(tg, grid, "solve_adjoint");
  sol.rates.check(tg, grid, "solve_adjoint");
  const double tau = tg.tau();
  const std::size_t n_steps = tg.n_steps();

  AdjointPair adj{Trajectory(tg, grid), Trajectory(tg, grid)};
  adj.q[n_steps] = spec.beta * (sol.z[n_steps] - spec.z_T);
  for (std::size_t k = n_steps; k >= 1; --k) {
    adj.xi[k] = solve_tridiagonal(detail::rate_jacobian(grid, prob.sabs, prob.rho() + tau, sol.rates[k]), adj.q[k]);
    adj.q[k - 1] = adj.q[k] + tau * (laplacian_apply(grid, adj.xi[k]) + spec.alpha * (sol.z[k - 1] - spec.z_d[k - 1]));
  }
  adj.xi[0] = solve_tridiagonal(detail::rate_jacobian(grid, prob.sabs, prob.rho(), sol.rates[0]), adj.q[0]);
  return adj;
}

/**
 * @brief Riesz representative in H^1_*(I; L2) of h -> sum_{k>=1} tau <f_k, h_k>_{L2}.
 *
 * Per spatial node this is the discrete two-point problem -p'' + p = f with
 * p(0) = 0 and the natural condition p'(T) = 0. f[0] is ignored.
 */
inline Trajectory riesz_h1star(const TimeGrid& tg, const Trajectory& f) {
  require(f.size() == tg.n_nodes(), "riesz_h1star: trajectory/time grid mismatch");
  const auto n_free = static_cast<Eigen::Index>(tg.n_steps());
  const double inv_tau2 = 1.0 / (tg.tau() * tg.tau());
  SymTridiagonal bvp{Eigen::VectorXd::Constant(n_free, 1.0 + 2.0 * inv_tau2),
                     Eigen::VectorXd::Constant(n_free - 1, -inv_tau2)};
  bvp.diag[n_free - 1] = 1.0 + inv_tau2;

  const Eigen::Index n_space = f.n_space();
  Trajectory p(std::vector<Field>(tg.n_nodes(), Field::Zero(n_space)));
  Eigen::VectorXd load(n_free);
  for (Eigen::Index i = 0; i < n_space; ++i) {
    for (Eigen::Index k = 0; k < n_free; ++k) load[k] = f[static_cast<std::size_t>(k + 1)][i];
    const Eigen::VectorXd col = solve_tridiagonal(bvp, load);
    for (Eigen::Index k = 0; k < n_free; ++k) p[static_cast<std::size_t>(k + 1)][i] = col[k];
  }
  return p;
}

/// Everything produced by one evaluation of the reduced objective.
struct ReducedEvaluation {
  double objective = 0.0;
  Trajectory gradient;  ///< H^1_* Riesz representative, vanishes at t = 0
  double gradient_norm = 0.0;
  RegularizedSolution state;
  AdjointPair adjoint;
};

inline double reduced_objective(const RegStateProblem& prob, const ObjectiveSpec& spec, const Trajectory& g,
                                const Trajectory& g_anchor, double prox_weight) {
  const auto sol = solve_regularized(prob, g);
  return objective_value(prob.tg, prob.grid, spec, sol.z, g, g_anchor, prox_weight);
}

/// Evaluates the derivative functional h -> sum tau <xi, h> + (1+p)<g, h>_{H1} - p <anchor, h>_{H1}.
inline double gradient_functional(const TimeGrid& tg, const SpatialGrid& grid, const Trajectory& xi,
                                  const Trajectory& g, const Trajectory& g_anchor, double prox_weight,
                                  const Trajectory& h) {
  double v = control_mass_pairing(tg, grid, xi, h) + (1.0 + prox_weight) * h1star_inner(tg, grid, g, h);
  if (prox_weight != 0.0) v -= prox_weight * h1star_inner(tg, grid, g_anchor, h);
  return v;
}

inline ReducedEvaluation evaluate_reduced(const RegStateProblem& prob, const ObjectiveSpec& spec,
                                          const Trajectory& g, const Trajectory& g_anchor, double prox_weight) {
  require_h1star(g, "reduced_gradient");
  if (prox_weight != 0.0) require_h1star(g_anchor, "reduced_gradient");
  ReducedEvaluation ev;
  ev.state = solve_regularized(prob, g);
  ev.objective = objective_value(prob.tg, prob.grid, spec, ev.state.z, g, g_anchor, prox_weight);
  ev.adjoint = solve_adjoint(prob, spec, ev.state);
  ev.gradient = riesz_h1star(prob.tg, ev.adjoint.xi);
  ev.gradient += (1.0 + prox_weight) * g;
  if (prox_weight != 0.0) ev.gradient -= prox_weight * g_anchor;
  ev.gradient[0].setZero();
  ev.gradient_norm = h1star_norm(prob.tg, prob.grid, ev.gradient);
  return ev;
}

inline Trajectory reduced_gradient(const RegStateProblem& prob, const ObjectiveSpec& spec, const Trajectory& g,
                                   const Trajectory& g_anchor, double prox_weight) {
  return evaluate_reduced(prob, spec, g, g_anchor, prox_weight).gradient;
}

}  // namespace ripvisc
