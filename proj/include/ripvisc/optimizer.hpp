#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "ripvisc/adjoint_gradient.hpp"
#include "ripvisc/discretization.hpp"
#include "ripvisc/errors.hpp"
#include "ripvisc/state_solvers.hpp"

namespace ripvisc {

/// Geometric continuation rho_j = rho_init * factor^j plus the inner stopping rule.
struct ContinuationSchedule {
  double rho_init = 1e-1;
  double factor = 0.1;
  std::size_t n_levels = 1;
  double inner_tol = 1e-8;
  std::size_t inner_max_iter = 500;
  double delta = std::numeric_limits<double>::infinity();  ///< monitored only

  void check() const {
    require(rho_init > 0.0, "ContinuationSchedule: rho_init must be positive");
    require(factor > 0.0 && factor < 1.0, "ContinuationSchedule: factor must lie in (0, 1)");
    require(n_levels >= 1, "ContinuationSchedule: n_levels must be >= 1");
    require(inner_tol > 0.0, "ContinuationSchedule: inner_tol must be positive");
  }

  [[nodiscard]] double rho(std::size_t level) const {
    return rho_init * std::pow(factor, static_cast<double>(level));
  }
};

struct LevelRecord {
  double rho = 0.0;
  std::size_t iterations = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
  double anchor_distance = 0.0;  ///< ||g - anchor||_{H^1}
  bool converged = false;        ///< false when the iteration cap was hit
  bool delta_violated = false;
  double drift_to_next = std::numeric_limits<double>::quiet_NaN();  ///< ||g_j - g_{j+1}||_{H^1}
  std::vector<double> objective_history;
};

struct OptimizeReport {
  std::vector<LevelRecord> levels;
  double prox_weight = 0.0;
  Trajectory g;
  RegularizedSolution state;
  AdjointPair adjoint;
};

struct MinimizeResult {
  Trajectory g;
  LevelRecord record;
  ReducedEvaluation final_eval;
};

/**
 * @brief Steepest descent in the H^1_*(I; L2) metric with Barzilai-Borwein
 * step proposals and Armijo backtracking.
 *
 * Once objective differences fall to rounding level a trial is also accepted
 * when it does not raise the objective beyond a few ulps and strictly
 * reduces the gradient norm.
 */
inline MinimizeResult minimize_at_rho(const RegStateProblem& prob, const ObjectiveSpec& spec,
                                      const ContinuationSchedule& sched, const Trajectory& g_start,
                                      const Trajectory& g_anchor, double prox_weight) {
  sched.check();
  require_h1star(g_start, "minimize_at_rho");
  constexpr double sigma = 1e-4;
  constexpr double min_step = 1e-14;
  const auto& tg = prob.tg;
  const auto& grid = prob.grid;

  MinimizeResult res;
  res.g = g_start;
  ReducedEvaluation ev = evaluate_reduced(prob, spec, res.g, g_anchor, prox_weight);
  res.record.rho = prob.rho();
  res.record.objective_history.push_back(ev.objective);

  double step = 1.0 / (1.0 + prox_weight);
  std::size_t it = 0;
  while (ev.gradient_norm > sched.inner_tol && it < sched.inner_max_iter) {
    const double g2 = ev.gradient_norm * ev.gradient_norm;
    const double round_slack = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(ev.objective));
    double s = step;
    for (;;) {
      Trajectory trial = res.g - s * ev.gradient;
      ReducedEvaluation ev_trial = evaluate_reduced(prob, spec, trial, g_anchor, prox_weight);
      const bool armijo = ev_trial.objective <= ev.objective - sigma * s * g2;
      const bool flat = ev_trial.objective <= ev.objective + round_slack &&
                        ev_trial.gradient_norm < ev.gradient_norm && sigma * s * g2 <= round_slack;
      if (armijo || flat) {
        const Trajectory ds = trial - res.g;
        const Trajectory dy = ev_trial.gradient - ev.gradient;
        const double sy = h1star_inner(tg, grid, ds, dy);
        const double ss = h1star_inner(tg, grid, ds, ds);
        step = sy > 0.0 ? std::clamp(ss / sy, 1e-8, 1e8) : 1.0 / (1.0 + prox_weight);
        res.g = std::move(trial);
        ev = std::move(ev_trial);
        break;
      }
      s *= 0.5;
      if (s < min_step)
        throw LineSearchStall("minimize_at_rho: no decrease at minimal step (gradient norm " +
                              std::to_string(ev.gradient_norm) + ")");
    }
    ++it;
    res.record.objective_history.push_back(ev.objective);
  }

  res.record.iterations = it;
  res.record.objective = ev.objective;
  res.record.gradient_norm = ev.gradient_norm;
  res.record.converged = ev.gradient_norm <= sched.inner_tol;
  if (g_anchor.size() == tg.n_nodes()) {
    res.record.anchor_distance = h1star_norm(tg, grid, res.g - g_anchor);
    res.record.delta_violated = res.record.anchor_distance > sched.delta;
  }
  res.final_eval = std::move(ev);
  return res;
}

/// Called after each continuation level with the level index, its problem and result.
using LevelObserver = std::function<void(std::size_t, const RegStateProblem&, const MinimizeResult&)>;

/// Runs minimize_at_rho over the rho levels of `sched`, warm-starting each level.
inline OptimizeReport continuation_solve(const RegStateProblem& prob_template, const ObjectiveSpec& spec,
                                         const ContinuationSchedule& sched, const Trajectory& g_anchor,
                                         double prox_weight, const Trajectory& g_start,
                                         const LevelObserver& on_level = {}) {
  sched.check();
  OptimizeReport report;
  report.prox_weight = prox_weight;
  Trajectory g = g_start;
  for (std::size_t j = 0; j < sched.n_levels; ++j) {
    const RegStateProblem prob = prob_template.with_rho(sched.rho(j));
    MinimizeResult res = minimize_at_rho(prob, spec, sched, g, g_anchor, prox_weight);
    if (on_level) on_level(j, prob, res);
    if (!report.levels.empty())
      report.levels.back().drift_to_next = h1star_norm(prob.tg, prob.grid, res.g - g);
    report.levels.push_back(std::move(res.record));
    g = std::move(res.g);
    if (j + 1 == sched.n_levels) {
      report.state = std::move(res.final_eval.state);
      report.adjoint = std::move(res.final_eval.adjoint);
    }
  }
  report.g = std::move(g);
  return report;
}

inline OptimizeReport continuation_solve(const RegStateProblem& prob_template, const ObjectiveSpec& spec,
                                         const ContinuationSchedule& sched, const Trajectory& g_anchor,
                                         double prox_weight) {
  return continuation_solve(prob_template, spec, sched, g_anchor, prox_weight,
                            Trajectory(prob_template.tg, prob_template.grid));
}

}  // namespace ripvisc
