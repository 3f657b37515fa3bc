// ripvisc: command-line front end for the vanishing-viscosity control toolkit.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "ripvisc/io.hpp"
#include "ripvisc/scenario.hpp"

namespace fs = std::filesystem;
using namespace ripvisc;

namespace {

enum ExitCode : int { kOk = 0, kConfigError = 2, kSolverFailure = 3, kCheckFailure = 4 };

constexpr double kGradCheckTol = 1e-5;
constexpr double kVeryWeakTol = 1e-8;

struct CommonOptions {
  std::string config;
  std::string out;
  double rho = std::numeric_limits<double>::quiet_NaN();
  bool quiet = false;
};

struct Run {
  ScenarioConfig cfg;
  fs::path out;
  bool quiet = false;

  [[nodiscard]] bool csv() const { return cfg.formats.count("csv") != 0; }
  [[nodiscard]] bool json_out() const { return cfg.formats.count("json") != 0; }
  [[nodiscard]] std::string path(const std::string& name) const { return (out / name).string(); }

  template <class... Args>
  void say(const char* fmt, Args... args) const {
    if (!quiet) std::printf(fmt, args...);
  }
};

Run open_run(const CommonOptions& opt) {
  Run run;
  run.cfg = load_config(opt.config);
  if (!std::isnan(opt.rho)) run.cfg.override_rho(opt.rho);
  run.out = opt.out.empty() ? fs::path(run.cfg.output_directory) : fs::path(opt.out);
  run.quiet = opt.quiet;
  std::error_code ec;
  fs::create_directories(run.out, ec);
  if (ec) throw ConfigError("cannot create output directory " + run.out.string() + ": " + ec.message());
  return run;
}

unsigned worker_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RIPVISC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("RIPVISC_THREADS must be a positive integer");
    n = std::min(n, static_cast<unsigned>(v));
  }
  return n;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : os_(path) {
    if (!os_) throw ConfigError("cannot write " + path);
    row_strings(header);
  }
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

 private:
  std::ofstream os_;
};

std::string cell(double v) { return format_real(v); }
std::string cell(std::size_t v) { return std::to_string(v); }
std::string cell(bool v) { return v ? "true" : "false"; }

json grid_json(const ScenarioConfig& c) {
  return {{"length", c.length}, {"n_interior", c.n_interior}, {"horizon", c.horizon}, {"n_steps", c.n_steps}};
}

Trajectory control_field(const ScenarioConfig& c, const std::string& text, const char* what) {
  Trajectory g = eval_field(text, c.context());
  if (g[0].cwiseAbs().maxCoeff() != 0.0)
    throw ConfigError(std::string(what) + " must vanish at t = 0 (got '" + text + "')");
  return g;
}

// ---------------------------------------------------------------------------

int cmd_solve_state(const CommonOptions& opt, bool reference) {
  Run run = open_run(opt);
  const auto& c = run.cfg;
  const auto tg = c.time_grid();
  const auto grid = c.grid();
  const Trajectory g = eval_field(c.control_initial, c.context());

  Trajectory z;
  json rep{{"command", "solve-state"}, {"grid", grid_json(c)}};
  save_trajectory(run.path("g.traj"), tg, grid, g, "g");
  if (reference) {
    auto sol = solve_rate_independent(c.ri_problem(), g);
    save_trajectory(run.path("lambda.traj"), tg, grid, sol.lambda, "lambda");
    z = std::move(sol.z);
    rep["mode"] = "reference";
  } else {
    auto sol = solve_regularized(c.reg_problem(c.rho), g);
    save_trajectory(run.path("rates.traj"), tg, grid, sol.rates, "rates");
    z = std::move(sol.z);
    rep["mode"] = "regularized";
    rep["rho"] = c.rho;
  }
  save_trajectory(run.path("z.traj"), tg, grid, z, "z");
  const auto norms = bochner_norms(tg, grid, z);
  rep["norms"] = to_json(norms);
  if (run.csv()) {
    CsvWriter csv(run.path("norms.csv"), {"field", "l2_h10", "linf_h10", "h1_l2", "w11_hm1"});
    csv.row_strings({"z", cell(norms.l2_h10), cell(norms.linf_h10), cell(norms.h1_l2), cell(norms.w11_hm1)});
  }
  if (run.json_out()) write_json(run.path("report.json"), rep);
  run.say("%s state: ||z||_C(H1_0) = %s, ||z||_L2(H1_0) = %s\n", reference ? "reference" : "regularized",
          format_real(norms.linf_h10).c_str(), format_real(norms.l2_h10).c_str());
  return kOk;
}

int cmd_solve_adjoint(const CommonOptions& opt) {
  Run run = open_run(opt);
  const auto& c = run.cfg;
  const auto tg = c.time_grid();
  const auto grid = c.grid();
  const auto prob = c.reg_problem(c.rho);
  const auto spec = c.objective();
  const Trajectory g = control_field(c, c.control_initial, "control.initial");
  const Trajectory anchor = control_field(c, c.control_anchor, "control.anchor");
  const auto ev = evaluate_reduced(prob, spec, g, anchor, c.prox_weight);

  save_trajectory(run.path("z.traj"), tg, grid, ev.state.z, "z");
  save_trajectory(run.path("rates.traj"), tg, grid, ev.state.rates, "rates");
  save_trajectory(run.path("q.traj"), tg, grid, ev.adjoint.q, "q");
  save_trajectory(run.path("xi.traj"), tg, grid, ev.adjoint.xi, "xi");
  save_trajectory(run.path("gradient.traj"), tg, grid, ev.gradient, "gradient");
  const auto bound = check_adjoint_bound(prob, spec, ev.state.z, ev.adjoint);
  if (run.csv()) {
    CsvWriter csv(run.path("adjoint.csv"), {"k", "t", "q_hm1", "xi_h10"});
    for (std::size_t k = 0; k < tg.n_nodes(); ++k)
      csv.row_strings({cell(k), cell(tg.t(k)), cell(norm_hm1(grid, ev.adjoint.q[k])), cell(norm_h10(grid, ev.adjoint.xi[k]))});
  }
  if (run.json_out())
    write_json(run.path("report.json"), {{"command", "solve-adjoint"},
                                         {"grid", grid_json(c)},
                                         {"rho", c.rho},
                                         {"objective", ev.objective},
                                         {"gradient_norm", ev.gradient_norm},
                                         {"adjoint_bound", to_json(bound)}});
  run.say("objective %s, gradient norm %s, adjoint bound margin %s\n", format_real(ev.objective).c_str(),
          format_real(ev.gradient_norm).c_str(), format_real(bound.margin).c_str());
  return kOk;
}

int cmd_grad_check(const CommonOptions& opt, const std::vector<double>& eps_override) {
  Run run = open_run(opt);
  const auto& c = run.cfg;
  const auto tg = c.time_grid();
  const auto grid = c.grid();
  const auto prob = c.reg_problem(c.rho);
  const auto spec = c.objective();
  const Trajectory g = control_field(c, c.control_initial, "control.initial");
  const Trajectory anchor = control_field(c, c.control_anchor, "control.anchor");
  const Trajectory h = control_field(c, c.grad_direction, "grad_check.direction");
  const std::vector<double> eps_list = eps_override.empty() ? c.grad_eps : eps_override;
  for (double e : eps_list)
    if (!(e > 0.0)) throw ConfigError("--eps values must be positive");

  const auto ev = evaluate_reduced(prob, spec, g, anchor, c.prox_weight);
  const double exact = gradient_functional(tg, grid, ev.adjoint.xi, g, anchor, c.prox_weight, h);
  struct Row {
    double eps, fd, err;
  };
  std::vector<Row> rows;
  for (double e : eps_list) {
    const double jp = reduced_objective(prob, spec, g + e * h, anchor, c.prox_weight);
    const double jm = reduced_objective(prob, spec, g - e * h, anchor, c.prox_weight);
    const double fd = (jp - jm) / (2.0 * e);
    const double err = std::abs(fd - exact) / std::max(std::abs(exact), std::numeric_limits<double>::min());
    rows.push_back({e, fd, err});
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) best = std::min(best, r.err);

  run.say("%-10s %-24s %-24s %-12s %s\n", "eps", "central_difference", "adjoint", "rel_error", "flag");
  for (const auto& r : rows)
    run.say("%-10.3g %-24.17g %-24.17g %-12.3e %s\n", r.eps, r.fd, exact, r.err, r.err > kGradCheckTol ? "above_tolerance" : "ok");
  if (run.csv()) {
    CsvWriter csv(run.path("grad_check.csv"), {"eps", "central_difference", "adjoint", "rel_error", "flag"});
    for (const auto& r : rows)
      csv.row_strings({cell(r.eps), cell(r.fd), cell(exact), cell(r.err), r.err > kGradCheckTol ? "above_tolerance" : "ok"});
  }
  if (run.json_out()) {
    json table = json::array();
    for (const auto& r : rows) table.push_back({{"eps", r.eps}, {"central_difference", r.fd}, {"rel_error", r.err}});
    write_json(run.path("report.json"), {{"command", "grad-check"},
                                         {"rho", c.rho},
                                         {"adjoint_derivative", exact},
                                         {"best_rel_error", best},
                                         {"tolerance", kGradCheckTol},
                                         {"passed", best <= kGradCheckTol},
                                         {"rows", table}});
  }
  if (best > kGradCheckTol) {
    std::fprintf(stderr, "grad-check failed: best relative error %.3e > %.0e\n", best, kGradCheckTol);
    return kCheckFailure;
  }
  return kOk;
}

/// Bundle layout written by optimize and read by verify-kkt.
void write_bundle(const Run& run, const OptimizeReport& rep, const Trajectory& anchor, const ObjectiveSpec& spec) {
  const auto& c = run.cfg;
  const auto tg = c.time_grid();
  const auto grid = c.grid();
  const fs::path dir = run.out / "bundle";
  fs::create_directories(dir);
  const auto p = [&](const char* n) { return (dir / n).string(); };
  save_trajectory(p("g.traj"), tg, grid, rep.g, "g");
  save_trajectory(p("anchor.traj"), tg, grid, anchor, "anchor");
  save_trajectory(p("z.traj"), tg, grid, rep.state.z, "z");
  save_trajectory(p("rates.traj"), tg, grid, rep.state.rates, "rates");
  save_trajectory(p("q.traj"), tg, grid, rep.adjoint.q, "q");
  save_trajectory(p("xi.traj"), tg, grid, rep.adjoint.xi, "xi");
  save_trajectory(p("z_d.traj"), tg, grid, spec.z_d, "z_d");
  Trajectory zt(tg, grid);
  for (std::size_t k = 0; k < tg.n_nodes(); ++k) zt[k] = spec.z_T;
  save_trajectory(p("z_T.traj"), tg, grid, zt, "z_T");

  ScenarioConfig b = c;
  for (const char* k : {"smoothing.rho_init", "smoothing.factor", "smoothing.n_levels", "output.directory", "study.load"})
    b.raw.erase(k);
  b.raw["smoothing.rho"] = format_real(rep.levels.back().rho);
  b.raw["objective.z_d"] = "file(z_d.traj)";
  b.raw["objective.z_T"] = "file(z_T.traj)";
  b.raw["control.initial"] = "file(g.traj)";
  b.raw["control.anchor"] = "file(anchor.traj)";
  b.raw["control.prox_weight"] = format_real(rep.prox_weight);
  std::ofstream os(p("scenario.cfg"));
  if (!os) throw ConfigError("cannot write bundle config");
  os << b.dump();
}

int cmd_optimize(const CommonOptions& opt) {
  Run run = open_run(opt);
  const auto& c = run.cfg;
  const auto tg = c.time_grid();
  const auto grid = c.grid();
  const auto spec = c.objective();
  const auto sched = c.schedule();
  const Trajectory g0 = control_field(c, c.control_initial, "control.initial");
  const Trajectory anchor = control_field(c, c.control_anchor, "control.anchor");
  const auto rep = continuation_solve(c.reg_problem(sched.rho_init), spec, sched, anchor, c.prox_weight, g0);

  save_trajectory(run.path("g.traj"), tg, grid, rep.g, "g");
  write_bundle(run, rep, anchor, spec);
  if (run.csv()) {
    CsvWriter levels(run.path("levels.csv"), {"level", "rho", "iterations", "objective", "gradient_norm",
                                              "anchor_distance", "converged", "delta_violated", "drift_to_next"});
    CsvWriter hist(run.path("objective_history.csv"), {"level", "iteration", "objective"});
    for (std::size_t j = 0; j < rep.levels.size(); ++j) {
      const auto& l = rep.levels[j];
      levels.row_strings({cell(j), cell(l.rho), cell(l.iterations), cell(l.objective), cell(l.gradient_norm),
                          cell(l.anchor_distance), cell(l.converged), cell(l.delta_violated), cell(l.drift_to_next)});
      for (std::size_t i = 0; i < l.objective_history.size(); ++i)
        hist.row_strings({cell(j), cell(i), cell(l.objective_history[i])});
    }
  }
  if (run.json_out()) {
    json j = to_json(rep);
    j["command"] = "optimize";
    j["grid"] = grid_json(c);
    j["inner_tol"] = sched.inner_tol;
    write_json(run.path("report.json"), j);
  }
  run.say("%-6s %-10s %-6s %-24s %-12s %s\n", "level", "rho", "iters", "objective", "grad_norm", "drift");
  for (std::size_t j = 0; j < rep.levels.size(); ++j) {
    const auto& l = rep.levels[j];
    run.say("%-6zu %-10.3g %-6zu %-24.17g %-12.3e %.3e%s\n", j, l.rho, l.iterations, l.objective, l.gradient_norm,
            l.drift_to_next, l.converged ? "" : "  (iteration cap)");
  }
  return kOk;
}

int cmd_rate_study(const CommonOptions& opt) {
  Run run = open_run(opt);
  const auto& c = run.cfg;
  const Trajectory g = eval_field(c.study_load.empty() ? c.control_initial : c.study_load, c.context());
  const auto study = rate_study(c.reg_problem(c.study_rhos.front()), c.ri_problem(), g, c.study_rhos, worker_threads());
  if (run.csv()) {
    CsvWriter csv(run.path("rate_study.csv"), {"rho", "error", "order", "fitted_constant"});
    for (const auto& r : study.rows) csv.row_strings({cell(r.rho), cell(r.error), cell(r.order), cell(r.fitted_constant)});
  }
  if (run.json_out()) {
    json rows = json::array();
    for (const auto& r : study.rows)
      rows.push_back({{"rho", r.rho}, {"error", r.error}, {"order", detail::real_to_json(r.order)},
                      {"fitted_constant", r.fitted_constant}});
    write_json(run.path("report.json"), {{"command", "rate-study"},
                                         {"grid", grid_json(c)},
                                         {"reference_h1_h10", study.reference_h1_norm},
                                         {"rows", rows}});
  }
  run.say("%-10s %-12s %-8s %s\n", "rho", "error", "order", "C_fit");
  for (const auto& r : study.rows) run.say("%-10.3g %-12.5e %-8.3f %.4f\n", r.rho, r.error, r.order, r.fitted_constant);
  return kOk;
}

int cmd_verify_kkt(const CommonOptions& opt, const std::string& bundle_dir) {
  CommonOptions o = opt;
  const bool from_bundle = !bundle_dir.empty();
  if (from_bundle) {
    if (!opt.config.empty()) throw ConfigError("verify-kkt takes either --config or --bundle, not both");
    o.config = (fs::path(bundle_dir) / "scenario.cfg").string();
    if (o.out.empty()) o.out = (fs::path(bundle_dir) / "verify").string();
  } else if (opt.config.empty()) {
    throw ConfigError("verify-kkt needs --config or --bundle");
  }
  Run run = open_run(o);
  const auto& c = run.cfg;
  const auto tg = c.time_grid();
  const auto grid = c.grid();
  const auto prob = c.reg_problem(c.rho);
  const auto spec = c.objective();
  const Trajectory g = control_field(c, c.control_initial, "control.initial");
  const Trajectory anchor = control_field(c, c.control_anchor, "control.anchor");

  // a bundle is audited as stored; a config is solved first
  const auto load = [&](const char* n) { return load_trajectory_on((fs::path(bundle_dir) / n).string(), tg, grid); };
  const SolutionBundle b = from_bundle ? SolutionBundle{prob, spec, g, anchor, c.prox_weight,
                                                        {load("z.traj"), load("rates.traj")},
                                                        {load("q.traj"), load("xi.traj")}}
                                       : make_bundle(prob, spec, g, anchor, c.prox_weight);
  const auto rep = audit_bundle(b, c.audit);

  std::vector<std::string> failures;
  for (const auto& ch : rep.estimate_checks)
    if (!ch.passed) failures.push_back("estimate " + ch.name + " margin " + format_real(ch.margin));
  if (rep.very_weak_adjoint > kVeryWeakTol) failures.push_back("very weak adjoint residual " + format_real(rep.very_weak_adjoint));
  if (from_bundle && rep.stationarity > c.inner_tol)
    failures.push_back("stationarity " + format_real(rep.stationarity) + " above inner_tol");

  if (run.csv()) {
    CsvWriter est(run.path("estimates.csv"), {"name", "lhs", "rhs", "margin", "asserted", "passed"});
    for (const auto& ch : rep.estimate_checks)
      est.row_strings({ch.name, cell(ch.lhs), cell(ch.rhs), cell(ch.margin), cell(ch.asserted), cell(ch.passed)});
    CsvWriter sc(run.path("sign_conditions.csv"), {"condition", "set_size", "violations", "fraction", "magnitude"});
    const auto& s = rep.sign_condition_stats;
    const std::pair<const char*, const ConditionStat*> rows[] = {{"moving_up", &s.moving_up},
                                                                  {"stuck_upper", &s.stuck_upper},
                                                                  {"interior", &s.interior},
                                                                  {"stuck_lower", &s.stuck_lower},
                                                                  {"moving_down", &s.moving_down}};
    for (const auto& [name, st] : rows)
      sc.row_strings({name, cell(st->set_size), cell(st->violations), cell(st->fraction), cell(st->magnitude)});
  }
  if (run.json_out()) {
    json j = to_json(rep);
    j["command"] = "verify-kkt";
    j["rho"] = c.rho;
    j["source"] = from_bundle ? "bundle" : "config";
    j["failures"] = failures;
    write_json(run.path("report.json"), j);
  }
  run.say("complementarity %.3e  stationarity %.3e  very-weak adjoint %.3e\n", rep.complementarity_q, rep.stationarity,
          rep.very_weak_adjoint);
  for (const auto& ch : rep.estimate_checks)
    run.say("  %-16s margin %+.4f %s\n", ch.name.c_str(), ch.margin, ch.asserted ? (ch.passed ? "ok" : "FAILED") : "(reported)");
  if (!failures.empty()) {
    for (const auto& f : failures) std::fprintf(stderr, "verify-kkt: %s\n", f.c_str());
    return kCheckFailure;
  }
  return kOk;
}

void add_common(CLI::App* sub, CommonOptions& opt, bool config_required = true) {
  auto* cfg = sub->add_option("--config", opt.config, "scenario configuration file");
  if (config_required) cfg->required();
  sub->add_option("--out", opt.out, "output directory (overrides output.directory)");
  sub->add_option("--rho", opt.rho, "override the smoothing parameter");
  sub->add_flag("--quiet", opt.quiet, "suppress tables on stdout");
}

std::vector<double> parse_eps(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0') throw ConfigError("--eps: bad value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal control of a rate-independent evolution by vanishing viscosity"};
  app.require_subcommand(1);
  CommonOptions opt;
  bool regularized = false;
  bool reference = false;
  std::string eps_text;
  std::string bundle_dir;

  auto* solve_state = app.add_subcommand("solve-state", "solve the forward problem for control.initial");
  add_common(solve_state, opt);
  auto* reg_flag = solve_state->add_flag("--regularized", regularized, "viscous solver at smoothing.rho (default)");
  solve_state->add_flag("--reference", reference, "rate-independent reference solver")->excludes(reg_flag);

  auto* solve_adjoint_cmd = app.add_subcommand("solve-adjoint", "state, adjoint and reduced gradient");
  add_common(solve_adjoint_cmd, opt);

  auto* grad_check = app.add_subcommand("grad-check", "compare the adjoint gradient with central differences");
  add_common(grad_check, opt);
  grad_check->add_option("--eps", eps_text, "comma-separated step sizes");

  auto* optimize = app.add_subcommand("optimize", "continuation in rho with gradient descent at each level");
  add_common(optimize, opt);

  auto* rate = app.add_subcommand("rate-study", "vanishing-viscosity error against the reference solver");
  add_common(rate, opt);

  auto* verify = app.add_subcommand("verify-kkt", "audit optimality conditions and estimates");
  add_common(verify, opt, false);
  verify->add_option("--bundle", bundle_dir, "bundle directory written by optimize");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*solve_state) return cmd_solve_state(opt, reference);
    if (*solve_adjoint_cmd) return cmd_solve_adjoint(opt);
    if (*grad_check) return cmd_grad_check(opt, eps_text.empty() ? std::vector<double>{} : parse_eps(eps_text));
    if (*optimize) return cmd_optimize(opt);
    if (*rate) return cmd_rate_study(opt);
    if (*verify) return cmd_verify_kkt(opt, bundle_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const ContractViolation& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const Error& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolverFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolverFailure;
  }
  return kConfigError;
}
