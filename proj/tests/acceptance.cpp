// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ripvisc/optimizer.hpp"
#include "ripvisc/verifier.hpp"
#include "test_support.hpp"

using namespace ripvisc;
using ripvisc::testing::sample_field;

namespace {

const double kPi = std::acos(-1.0);

int g_failures = 0;

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const SpatialGrid grid(1.0, 199);
  const TimeGrid tg(1.0, 400);
  const RegStateProblem reg(grid, tg, SmoothedAbs(1e-1));
  const RISolveProblem ri(grid, tg);
  const std::vector<double> rhos{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  const std::vector<Trajectory> loads{
      sample_field(tg, grid, [](double t, double x) { return 4.0 * t * std::sin(kPi * x); }),
      sample_field(tg, grid, [](double t, double x) { return 3.0 * t * std::sin(2.0 * kPi * x) + 2.0 * t * t; })};
  double min_order = std::numeric_limits<double>::infinity();
  std::vector<double> constants;
  for (const auto& g : loads) {
    const auto st = rate_study(reg, ri, g, rhos, 1);
    double c = 0.0;
    for (const auto& r : st.rows) {
      if (!std::isnan(r.order)) min_order = std::min(min_order, r.order);
      c = std::max(c, r.fitted_constant);
    }
    constants.push_back(c);
  }
  const double ratio = std::max(constants[0], constants[1]) / std::min(constants[0], constants[1]);
  const double secs = seconds_since(t0);
  const bool ok = min_order >= 0.4 && ratio <= 2.0 && secs <= 120.0;
  report(1, "vanishing-viscosity rate", ok,
         "min order " + fmt("%.3f", min_order) + " (>= 0.4), constants " + fmt("%.4f", constants[0]) + " / " +
             fmt("%.4f", constants[1]) + " ratio " + fmt("%.3f", ratio) + " (<= 2), " + fmt("%.1f s", secs));
}

void criterion_2() {
  const SpatialGrid grid(1.0, 49);
  const TimeGrid tg(1.0, 200);
  const RISolveProblem ri(grid, tg);
  const std::vector<Trajectory> loads{
      sample_field(tg, grid, [](double t, double x) { return 4.0 * t * std::sin(kPi * x); }),
      sample_field(tg, grid, [](double t, double x) {
        return 0.6 * std::sin(kPi * x) + 5.0 * std::sin(2.0 * kPi * t) * std::sin(2.0 * kPi * x) * x;
      })};
  double eq9 = std::numeric_limits<double>::infinity();
  for (const auto& g : loads) eq9 = std::min(eq9, check_rate_bound(tg, grid, solve_rate_independent(ri, g).z, g).margin);

  // boundary-case initial loads: smoothed sign patterns with sup|g(0)| = 1
  double eq25 = std::numeric_limits<double>::infinity();
  for (double rho : {1e-1, 1e-3}) {
    const RegStateProblem p(grid, tg, SmoothedAbs(rho));
    for (double k : {1.0, 3.0, 6.0}) {
      for (double steep : {2.0, 20.0}) {
        Field g0 = grid.sample([&](double x) { return std::tanh(steep * std::sin(k * kPi * x)); });
        g0 /= g0.cwiseAbs().maxCoeff();
        eq25 = std::min(eq25, check_initial_rate(p, t_rho_solve(p, g0, 0.0)).margin);
      }
    }
  }

  double energy = std::numeric_limits<double>::infinity();
  for (double rho : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const RegStateProblem p(grid, tg, SmoothedAbs(rho));
    for (const auto& g : loads) energy = std::min(energy, check_rate_energy(p, solve_regularized(p, g), g).margin);
  }
  const bool ok = eq9 >= -0.05 && eq25 >= -0.01 && energy >= -0.05;
  report(2, "a-priori estimates", ok,
         "per-step rate bound worst margin " + fmt("%.4f", eq9) + " (>= -0.05), initial-rate margin " +
             fmt("%.4f", eq25) + " (>= -0.01), rate-energy margin " + fmt("%.4f", energy) + " (>= -0.05)");
}

void criterion_3() {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> log_rho(-8.0, 1.0);
  std::uniform_real_distribution<double> scale(-4.0, 4.0);
  double worst = 0.0;  // largest violation of any property
  for (int i = 0; i < 1000000; ++i) {
    const double rho = std::pow(10.0, log_rho(rng));
    const double v = scale(rng) * rho;
    const SmoothedAbs s(rho);
    const double a = std::abs(v);
    const double val = s.value(v);
    const double d1 = s.first(v);
    const double d2 = s.second(v);
    if (a >= rho) worst = std::max(worst, std::abs(val - a));
    worst = std::max({worst, -d2, d2 - 2.0 / rho});
    worst = std::max({worst, std::abs(s.first(-v) + d1), std::abs(s.value(-v) - val)});
    worst = std::max({worst, a - val, val - (a + rho), (a - rho) - d1 * v});
  }
  report(3, "smoothed-modulus axioms", worst <= 1e-12, "worst violation " + fmt("%.3e", worst) + " over 1e6 samples (<= 1e-12)");
}

void criterion_4() {
  const SpatialGrid grid(1.0, 49);
  const TimeGrid tg(1.0, 100);
  const Trajectory z_d = sample_field(tg, grid, [](double t, double x) { return 0.05 * t * std::sin(2.0 * kPi * x); });
  const Field z_T = grid.sample([](double x) { return 0.08 * x * (1.0 - x); });
  const Trajectory g = sample_field(tg, grid, [](double t, double x) { return 5.0 * t * std::sin(kPi * x) + 2.0 * t * t * x; });
  const Trajectory h = sample_field(tg, grid, [](double t, double x) {
    return std::sin(1.5 * kPi * t) * (std::sin(2.0 * kPi * x) + std::exp(-30.0 * (x - 0.3) * (x - 0.3)));
  });
  struct Case {
    const char* name;
    double alpha, beta;
  };
  double worst = 0.0;
  for (const Case& c : {Case{"tracking", 10.0, 0.0}, Case{"terminal", 0.0, 10.0}, Case{"mixed", 5.0, 5.0}}) {
    const ObjectiveSpec spec{c.alpha, c.beta, z_d, z_T};
    for (double rho : {1e-1, 1e-2}) {
      const RegStateProblem p(grid, tg, SmoothedAbs(rho));
      const double eps = 1e-4;
      const auto ev = evaluate_reduced(p, spec, g, Trajectory{}, 0.0);
      const double exact = gradient_functional(tg, grid, ev.adjoint.xi, g, Trajectory{}, 0.0, h);
      const double fd = (reduced_objective(p, spec, g + eps * h, Trajectory{}, 0.0) -
                         reduced_objective(p, spec, g - eps * h, Trajectory{}, 0.0)) /
                        (2.0 * eps);
      worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
    }
  }
  report(4, "gradient exactness", worst <= 1e-6, "worst relative error " + fmt("%.3e", worst) + " at eps 1e-4, 3 scenarios x 2 rho (<= 1e-6)");
}

struct LevelAudit {
  double rho = 0.0;
  double gradient_norm = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
  EstimateCheck adjoint_bound;
  double xi_scaled = 0.0;  ///< rho^{1/2} ||xi||_{L2(I;H1_0)}
  double drift = std::numeric_limits<double>::quiet_NaN();
};

/// Manufactured scenario: targets from the reference state of g* = 6 t sin(pi x), weights 1e3.
std::vector<LevelAudit> continuation_audit(double prox_weight, std::size_t n_levels) {
  const SpatialGrid grid(1.0, 49);
  const TimeGrid tg(1.0, 200);
  const RegStateProblem prob(grid, tg, SmoothedAbs(1e-1));
  const Trajectory g_star = sample_field(tg, grid, [](double t, double x) { return 6.0 * t * std::sin(kPi * x); });
  const auto ref = solve_rate_independent(RISolveProblem(grid, tg), g_star);
  const ObjectiveSpec spec{1e3, 1e3, ref.z, ref.z.back()};
  ContinuationSchedule sched;
  sched.rho_init = 1e-1;
  sched.factor = 0.1;
  sched.n_levels = n_levels;
  sched.inner_tol = 1e-8;
  sched.inner_max_iter = 5000;
  const Trajectory anchor = prox_weight > 0.0 ? g_star : Trajectory(tg, grid);
  const auto basis = complementarity_basis(tg, grid);

  std::vector<LevelAudit> out;
  const auto rep = continuation_solve(
      prob, spec, sched, anchor, prox_weight, g_star,
      [&](std::size_t, const RegStateProblem& p, const MinimizeResult& res) {
        LevelAudit a;
        a.rho = p.rho();
        a.gradient_norm = res.record.gradient_norm;
        const auto& ev = res.final_eval;
        a.stationarity = stationarity_residual(tg, grid, ev.adjoint.xi, res.g, anchor, prox_weight);
        a.complementarity = check_complementarity(tg, grid, ev.state.rates, ev.adjoint.q, basis);
        a.adjoint_bound = check_adjoint_bound(p, spec, ev.state.z, ev.adjoint);
        double xi2 = 0.0;
        for (std::size_t k = 1; k <= tg.n_steps(); ++k) xi2 += tg.tau() * std::pow(norm_h10(grid, ev.adjoint.xi[k]), 2);
        a.xi_scaled = std::sqrt(p.rho() * xi2);
        out.push_back(a);
      });
  for (std::size_t j = 0; j < out.size(); ++j) out[j].drift = rep.levels[j].drift_to_next;
  return out;
}

void criteria_5_6_7(const std::vector<LevelAudit>& levels, double secs) {
  double worst_gap = 0.0;
  double worst_stat = 0.0;
  for (const auto& l : levels) {
    worst_gap = std::max(worst_gap, std::abs(l.stationarity - l.gradient_norm));
    worst_stat = std::max(worst_stat, l.stationarity);
  }
  report(5, "stationarity", worst_gap <= 1e-10 && worst_stat <= 1e-8,
         "max |residual - gradient norm| " + fmt("%.3e", worst_gap) + " (<= 1e-10), max residual " +
             fmt("%.3e", worst_stat) + " (<= 1e-8)");

  bool monotone = true;
  std::string seq;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    if (j > 0 && !(levels[j].complementarity < levels[j - 1].complementarity)) monotone = false;
    seq += (j ? " > " : "") + fmt("%.3e", levels[j].complementarity);
  }
  const double ratio = levels.back().complementarity / levels.front().complementarity;
  report(6, "complementarity decay", monotone && ratio <= 0.1 && secs <= 300.0,
         seq + ", final/first " + fmt("%.3f", ratio) + " (<= 0.1), " + fmt("%.1f s", secs));

  double worst_margin = std::numeric_limits<double>::infinity();
  std::string xi_seq;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    worst_margin = std::min(worst_margin, levels[j].adjoint_bound.margin);
    xi_seq += (j ? ", " : "") + fmt("%.3e", levels[j].xi_scaled);
  }
  report(7, "adjoint bounds", worst_margin >= 0.0,
         "worst margin with C = (1+T)e^T " + fmt("%.4f", worst_margin) + " (>= 0); rho^1/2 ||xi|| = " + xi_seq);
}

void criterion_8() {
  const SpatialGrid grid(1.0, 49);
  const TimeGrid tg(1.0, 200);
  double sup = 0.0;
  for (const auto& g : {sample_field(tg, grid, [](double t, double x) { return 4.0 * t * std::sin(kPi * x); }),
                        sample_field(tg, grid, [](double t, double x) {
                          return 0.6 * std::sin(kPi * x) + 5.0 * std::sin(2.0 * kPi * t) * std::sin(2.0 * kPi * x) * x;
                        })}) {
    const auto ref = solve_rate_independent(RISolveProblem(grid, tg), g);
    const auto reg = solve_regularized(RegStateProblem(grid, tg, SmoothedAbs(1e-6)), g);
    sup = std::max(sup, sup_distance_h10(grid, ref.z, reg.z));
  }

  // one mode with nodal values in {1, 0, -1}: the middle mode for odd n, the first mode for n = 2
  double play = 0.0;
  double peak = 0.0;  // largest scalar amplitude, to show the oracle is not trivial
  for (std::size_t n : {2u, 49u}) {
    const SpatialGrid g1(1.0, n);
    const double h = g1.h();
    const double mu = n == 2 ? 1.0 / (h * h) : 2.0 / (h * h);
    Field mode(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < mode.size(); ++i)
      mode[i] = n == 2 ? 1.0 : std::round(std::sin(kPi * static_cast<double>(i + 1) / 2.0));
    Trajectory g(tg, g1);
    std::vector<double> s(tg.n_nodes());
    for (std::size_t k = 0; k < tg.n_nodes(); ++k) {
      const double t = tg.t(k);
      s[k] = 0.8 * std::cos(2.0 * kPi * t) + 4.0 * t * std::sin(4.0 * kPi * t);
      g[k] = s[k] * mode;
    }
    const auto sol = solve_rate_independent(RISolveProblem(g1, tg), g);
    double c = 0.0;
    for (std::size_t k = 0; k + 1 < tg.n_nodes(); ++k) {
      const double f = s[k + 1] - mu * c;
      c += std::max(0.0, (f - 1.0) / mu) - std::max(0.0, (-1.0 - f) / mu);
      play = std::max(play, (sol.z[k + 1] - c * mode).lpNorm<Eigen::Infinity>());
      peak = std::max(peak, std::abs(c));
    }
  }
  report(8, "oracle equivalence", sup <= 1e-3 && play <= 1e-8,
         "reference vs rho = 1e-6 " + fmt("%.3e", sup) + " (<= 1e-3), one-mode vs scalar play " + fmt("%.3e", play) +
             " (<= 1e-8, peak amplitude " + fmt("%.3e", peak) + ")");
}

void criterion_9(const std::vector<LevelAudit>& levels) {
  bool decreasing = true;
  std::string seq;
  for (std::size_t j = 0; j + 1 < levels.size(); ++j) {
    if (j > 0 && !(levels[j].drift < levels[j - 1].drift)) decreasing = false;
    seq += (j ? " > " : "") + fmt("%.3e", levels[j].drift);
  }
  report(9, "convergence of minimizers", decreasing && levels.size() >= 4,
         "proximal drift " + seq + " over " + std::to_string(levels.size()) + " levels");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto plain = continuation_audit(0.0, 4);
    criteria_5_6_7(plain, seconds_since(t0));
  }
  criterion_8();
  criterion_9(continuation_audit(1.0, 5));
  std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "ACCEPTED" : "REJECTED", g_failures);
  return g_failures == 0 ? 0 : 1;
}
