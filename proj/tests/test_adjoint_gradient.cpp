#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ripvisc/adjoint_gradient.hpp"
#include "ripvisc/verifier.hpp"
#include "test_support.hpp"

using namespace ripvisc;
using ripvisc::testing::random_field;
using ripvisc::testing::rel_err;
using ripvisc::testing::sample_field;

namespace {

const double kPi = std::acos(-1.0);

struct Scenario {
  RegStateProblem prob;
  ObjectiveSpec spec;
  Trajectory g;
  Trajectory h;
};

Scenario make_scenario(double rho, double alpha, double beta) {
  const SpatialGrid grid(1.0, 39);
  const TimeGrid tg(1.0, 80);
  Scenario s{RegStateProblem(grid, tg, SmoothedAbs(rho)), ObjectiveSpec{}, Trajectory{}, Trajectory{}};
  s.spec.alpha = alpha;
  s.spec.beta = beta;
  s.spec.z_d = sample_field(tg, grid, [](double t, double x) { return 0.05 * t * std::sin(2.0 * kPi * x); });
  s.spec.z_T = grid.sample([](double x) { return 0.08 * x * (1.0 - x); });
  s.g = sample_field(tg, grid, [](double t, double x) { return 5.0 * t * std::sin(kPi * x) + 2.0 * t * t * x; });
  s.h = sample_field(tg, grid, [](double t, double x) {
    return std::sin(1.5 * kPi * t) * (std::sin(2.0 * kPi * x) + std::exp(-30.0 * (x - 0.3) * (x - 0.3)));
  });
  return s;
}

double central_difference(const Scenario& s, double eps, const Trajectory& anchor = {}, double prox = 0.0) {
  const double jp = reduced_objective(s.prob, s.spec, s.g + eps * s.h, anchor, prox);
  const double jm = reduced_objective(s.prob, s.spec, s.g - eps * s.h, anchor, prox);
  return (jp - jm) / (2.0 * eps);
}

}  // namespace

TEST(Adjoint, ZeroWeightsGiveZeroAdjoint) {
  auto s = make_scenario(1e-2, 0.0, 0.0);
  const auto sol = solve_regularized(s.prob, s.g);
  const auto adj = solve_adjoint(s.prob, s.spec, sol);
  EXPECT_EQ(adj.q.max_abs(), 0.0);
  EXPECT_EQ(adj.xi.max_abs(), 0.0);
}

TEST(Adjoint, PureControlCostGradientIsTheControl) {
  auto s = make_scenario(1e-2, 0.0, 0.0);
  const auto ev = evaluate_reduced(s.prob, s.spec, s.g, Trajectory{}, 0.0);
  EXPECT_EQ(ev.gradient, s.g);
  EXPECT_DOUBLE_EQ(ev.objective, 0.5 * h1star_inner(s.prob.tg, s.prob.grid, s.g, s.g));
}

TEST(Adjoint, PairingEqualsLinearizedTrackingDerivative) {
  for (double rho : {1e-1, 1e-3}) {
    auto s = make_scenario(rho, 3.0, 2.0);
    const auto& tg = s.prob.tg;
    const auto& grid = s.prob.grid;
    const auto sol = solve_regularized(s.prob, s.g);
    const auto adj = solve_adjoint(s.prob, s.spec, sol);
    const Trajectory dz = solve_linearized(s.prob, sol, s.h);
    double lhs = s.spec.beta * inner_l2(grid, sol.z.back() - s.spec.z_T, dz.back());
    for (std::size_t k = 0; k < tg.n_steps(); ++k)
      lhs += s.spec.alpha * tg.tau() * inner_l2(grid, sol.z[k] - s.spec.z_d[k], dz[k]);
    const double rhs = control_mass_pairing(tg, grid, adj.xi, s.h);
    EXPECT_LT(rel_err(rhs, lhs), 1e-10) << "rho " << rho;
  }
}

TEST(Riesz, RepresentsTheMassPairing) {
  std::mt19937_64 rng(8);
  const SpatialGrid grid(1.0, 11);
  const TimeGrid tg(2.0, 37);
  Trajectory f(tg, grid);
  Trajectory h(tg, grid);
  for (std::size_t k = 0; k < tg.n_nodes(); ++k) {
    f[k] = random_field(rng, grid.size());
    if (k > 0) h[k] = random_field(rng, grid.size());
  }
  const Trajectory p = riesz_h1star(tg, f);
  EXPECT_EQ(p[0].lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_LT(rel_err(h1star_inner(tg, grid, p, h), control_mass_pairing(tg, grid, f, h)), 1e-12);
}

TEST(Riesz, ConstantLoadMatchesTwoPointProblem) {
  // -p'' + p = 1, p(0) = 0, p'(1) = 0  =>  p(1) = 1 - 1 / cosh(1)
  const SpatialGrid grid(1.0, 3);
  for (std::size_t steps : {100u, 400u}) {
    const TimeGrid tg(1.0, steps);
    Trajectory f(tg, grid);
    for (std::size_t k = 0; k < tg.n_nodes(); ++k) f[k] = Field::Ones(3);
    const Trajectory p = riesz_h1star(tg, f);
    EXPECT_NEAR(p.back()[1], 1.0 - 1.0 / std::cosh(1.0), 2.0 * tg.tau());
    const double t_mid = tg.t(steps / 2);
    EXPECT_NEAR(p[steps / 2][0], 1.0 - std::cosh(t_mid) + std::tanh(1.0) * std::sinh(t_mid), 2.0 * tg.tau());
  }
}

TEST(Gradient, CentralDifferencesAgreeInThreeScenarios) {
  struct Weights {
    double alpha, beta;
  };
  for (const auto& w : {Weights{10.0, 0.0}, Weights{0.0, 10.0}, Weights{5.0, 5.0}}) {
    for (double rho : {1e-1, 1e-2}) {
      auto s = make_scenario(rho, w.alpha, w.beta);
      const auto ev = evaluate_reduced(s.prob, s.spec, s.g, Trajectory{}, 0.0);
      const double exact = gradient_functional(s.prob.tg, s.prob.grid, ev.adjoint.xi, s.g, Trajectory{}, 0.0, s.h);
      EXPECT_LT(rel_err(central_difference(s, 1e-4), exact), 1e-6)
          << "alpha " << w.alpha << " beta " << w.beta << " rho " << rho;
      // the Riesz representative reproduces the same directional derivative
      EXPECT_LT(rel_err(h1star_inner(s.prob.tg, s.prob.grid, ev.gradient, s.h), exact), 1e-10);
    }
  }
}

TEST(Gradient, ProximalTermAddsAnchorShift) {
  auto s = make_scenario(1e-2, 0.0, 0.0);
  const Trajectory anchor = 0.5 * s.h + 0.25 * s.g;
  Trajectory a = anchor;
  a[0].setZero();
  const auto ev = evaluate_reduced(s.prob, s.spec, s.g, a, 1.0);
  Trajectory expected = 2.0 * s.g - a;
  EXPECT_LT((ev.gradient - expected).max_abs(), 1e-14);
  const double exact = h1star_inner(s.prob.tg, s.prob.grid, ev.gradient, s.h);
  EXPECT_LT(rel_err(central_difference(s, 1e-3, a, 1.0), exact), 1e-9);
}

TEST(Gradient, RampControlCost) {
  const SpatialGrid grid(1.0, 21);
  const TimeGrid tg(1.0, 400);
  const RegStateProblem prob(grid, tg, SmoothedAbs(1e-2));
  const auto spec = ObjectiveSpec::zero_targets(tg, grid, 0.0, 0.0);
  const Field p = grid.sample([](double x) { return std::sin(kPi * x); });
  const Trajectory g = sample_field(tg, grid, [](double t, double x) { return t * std::sin(kPi * x); });
  const double j = reduced_objective(prob, spec, g, Trajectory{}, 0.0);
  const double pl2 = norm_l2(grid, p);
  EXPECT_LT(rel_err(j, 0.5 * (1.0 / 3.0 + 1.0) * pl2 * pl2), 2.0 * tg.tau());
}

TEST(Gradient, RejectsControlWithInitialValue) {
  auto s = make_scenario(1e-2, 1.0, 1.0);
  Trajectory g = s.g;
  g[0][4] = 0.1;
  EXPECT_THROW(evaluate_reduced(s.prob, s.spec, g, Trajectory{}, 0.0), ContractViolation);
  EXPECT_THROW(objective_value(s.prob.tg, s.prob.grid, s.spec, solve_regularized(s.prob, g).z, g, {}, 0.0),
               ContractViolation);
}

TEST(Adjoint, BoundHoldsAcrossRho) {
  for (double rho : {1e-1, 1e-2, 1e-3, 1e-4}) {
    auto s = make_scenario(rho, 20.0, 20.0);
    const auto sol = solve_regularized(s.prob, s.g);
    const auto adj = solve_adjoint(s.prob, s.spec, sol);
    const auto c = check_adjoint_bound(s.prob, s.spec, sol.z, adj);
    EXPECT_GE(c.margin, 0.0) << "rho " << rho;
  }
}
