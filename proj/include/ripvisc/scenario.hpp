#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ripvisc/adjoint_gradient.hpp"
#include "ripvisc/discretization.hpp"
#include "ripvisc/errors.hpp"
#include "ripvisc/io.hpp"
#include "ripvisc/optimizer.hpp"
#include "ripvisc/state_solvers.hpp"
#include "ripvisc/verifier.hpp"

namespace ripvisc {

// ---------------------------------------------------------------------------
// Analytic families
//
// Space profiles P (functions of x on [0, L]):
//   zero | const(a) | sin(k, a) | bump(c, w, a) | smoothsign(k, s, a)
//   | sum(P, P) | scale(a, P) | final(X) | file(path)
// Space-time fields X (functions of t and x):
//   zero | ramp(P) | cycle(f, P) | steady(P) | smoothstep(P)
//   | sum(X, X) | scale(a, X) | file(path) | state(X)
//
// ramp(P) = t P, cycle(f, P) = sin(2 pi f t / T) P, smoothstep(P) = (3s^2 - 2s^3) P
// with s = t / T. state(X) is the rate-independent state driven by X and
// final(X) its value at t = T. As a profile, file(path) takes the last row of
// a trajectory file. smoothsign(k, s, a) is a tanh(s sin(k pi x / L))
// rescaled so that its largest nodal magnitude is exactly |a|.

struct Expr {
  std::string name;  ///< empty for numbers
  double number = 0.0;
  std::string raw;  ///< file(...) argument
  std::vector<Expr> args;
};

namespace detail {

class ExprParser {
 public:
  explicit ExprParser(std::string text) : s_(std::move(text)) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return e;
  }

 private:
  std::string s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("cannot parse '" + s_ + "' at column " + std::to_string(pos_ + 1) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  Expr expr() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end");
    Expr e;
    const char c = s_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      e.name = s_.substr(start, pos_ - start);
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == '(') {
        ++pos_;
        if (e.name == "file") {
          const std::size_t close = s_.find(')', pos_);
          if (close == std::string::npos) fail("missing ')'");
          e.raw = s_.substr(pos_, close - pos_);
          while (!e.raw.empty() && std::isspace(static_cast<unsigned char>(e.raw.back()))) e.raw.pop_back();
          while (!e.raw.empty() && std::isspace(static_cast<unsigned char>(e.raw.front()))) e.raw.erase(0, 1);
          pos_ = close + 1;
          return e;
        }
        for (;;) {
          e.args.push_back(expr());
          skip_ws();
          if (pos_ < s_.size() && s_[pos_] == ',') {
            ++pos_;
            continue;
          }
          if (pos_ < s_.size() && s_[pos_] == ')') {
            ++pos_;
            break;
          }
          fail("expected ',' or ')'");
        }
      }
      return e;
    }
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    e.number = std::strtod(begin, &end);
    if (end == begin) fail("expected a number or a family name");
    pos_ += static_cast<std::size_t>(end - begin);
    return e;
  }
};

}  // namespace detail

inline Expr parse_expr(const std::string& text) { return detail::ExprParser(text).parse(); }

/// Grids and solver settings needed to evaluate families.
struct FamilyContext {
  SpatialGrid grid;
  TimeGrid tg;
  double pdas_c = 1.0;
  std::size_t pdas_max_iter = 100;
  std::string base_dir;  ///< relative file(...) paths resolve against this
};

namespace detail {

inline void expect_args(const Expr& e, std::size_t n) {
  if (e.args.size() != n)
    throw ConfigError("family '" + e.name + "' takes " + std::to_string(n) + " argument(s), got " +
                      std::to_string(e.args.size()));
}

inline double number_arg(const Expr& e, std::size_t i) {
  const Expr& a = e.args[i];
  if (!a.name.empty()) throw ConfigError("family '" + e.name + "': argument " + std::to_string(i + 1) + " must be a number");
  if (!std::isfinite(a.number)) throw ConfigError("family '" + e.name + "': non-finite argument");
  return a.number;
}

inline std::string resolve_path(const FamilyContext& ctx, const std::string& p) {
  if (p.empty()) throw ConfigError("file(): empty path");
  if (p.front() == '/' || ctx.base_dir.empty()) return p;
  return ctx.base_dir + "/" + p;
}

}  // namespace detail

inline Trajectory eval_field(const Expr& e, const FamilyContext& ctx);

inline Field eval_profile(const Expr& e, const FamilyContext& ctx) {
  using detail::expect_args;
  using detail::number_arg;
  const auto& grid = ctx.grid;
  const double pi = std::acos(-1.0);
  const double L = grid.length();
  if (e.name.empty()) throw ConfigError("a bare number is not a profile; use const(a)");
  if (e.name == "zero") {
    if (!e.args.empty()) expect_args(e, 0);
    return grid.zeros();
  }
  if (e.name == "const") {
    expect_args(e, 1);
    return Field::Constant(grid.size(), number_arg(e, 0));
  }
  if (e.name == "sin") {
    expect_args(e, 2);
    const double k = number_arg(e, 0);
    const double a = number_arg(e, 1);
    return grid.sample([&](double x) { return a * std::sin(k * pi * x / L); });
  }
  if (e.name == "bump") {
    expect_args(e, 3);
    const double c = number_arg(e, 0);
    const double w = number_arg(e, 1);
    const double a = number_arg(e, 2);
    if (w <= 0.0) throw ConfigError("bump: width must be positive");
    return grid.sample([&](double x) { return a * smooth_bump((x - c) / w); });
  }
  if (e.name == "smoothsign") {
    expect_args(e, 3);
    const double k = number_arg(e, 0);
    const double steep = number_arg(e, 1);
    const double a = number_arg(e, 2);
    if (steep <= 0.0) throw ConfigError("smoothsign: steepness must be positive");
    Field f = grid.sample([&](double x) { return std::tanh(steep * std::sin(k * pi * x / L)); });
    const double m = f.cwiseAbs().maxCoeff();
    if (m == 0.0) throw ConfigError("smoothsign: profile vanishes on the grid");
    f /= m;
    return a * f;
  }
  if (e.name == "sum") {
    expect_args(e, 2);
    return eval_profile(e.args[0], ctx) + eval_profile(e.args[1], ctx);
  }
  if (e.name == "scale") {
    expect_args(e, 2);
    return number_arg(e, 0) * eval_profile(e.args[1], ctx);
  }
  if (e.name == "file") return load_trajectory_on(detail::resolve_path(ctx, e.raw), ctx.tg, grid).back();
  if (e.name == "final") {
    expect_args(e, 1);
    Expr state = e;
    state.name = "state";
    return eval_field(state, ctx).back();
  }
  throw ConfigError("unknown profile family '" + e.name + "'");
}

inline Trajectory eval_field(const Expr& e, const FamilyContext& ctx) {
  using detail::expect_args;
  using detail::number_arg;
  const auto& tg = ctx.tg;
  const auto& grid = ctx.grid;
  const double pi = std::acos(-1.0);
  const auto separable = [&](const Field& p, auto&& amplitude) {
    Trajectory u(tg, grid);
    for (std::size_t k = 0; k < tg.n_nodes(); ++k) u[k] = amplitude(tg.t(k)) * p;
    return u;
  };
  if (e.name.empty()) throw ConfigError("a bare number is not a space-time field");
  if (e.name == "zero") {
    if (!e.args.empty()) expect_args(e, 0);
    return Trajectory(tg, grid);
  }
  if (e.name == "ramp") {
    expect_args(e, 1);
    return separable(eval_profile(e.args[0], ctx), [](double t) { return t; });
  }
  if (e.name == "cycle") {
    expect_args(e, 2);
    const double f = number_arg(e, 0);
    const double T = tg.horizon();
    return separable(eval_profile(e.args[1], ctx), [&](double t) { return std::sin(2.0 * pi * f * t / T); });
  }
  if (e.name == "steady") {
    expect_args(e, 1);
    return separable(eval_profile(e.args[0], ctx), [](double) { return 1.0; });
  }
  if (e.name == "smoothstep") {
    expect_args(e, 1);
    const double T = tg.horizon();
    return separable(eval_profile(e.args[0], ctx), [&](double t) {
      const double s = t / T;
      return s * s * (3.0 - 2.0 * s);
    });
  }
  if (e.name == "sum") {
    expect_args(e, 2);
    return eval_field(e.args[0], ctx) + eval_field(e.args[1], ctx);
  }
  if (e.name == "scale") {
    expect_args(e, 2);
    return number_arg(e, 0) * eval_field(e.args[1], ctx);
  }
  if (e.name == "file") return load_trajectory_on(detail::resolve_path(ctx, e.raw), tg, grid);
  if (e.name == "state") {
    expect_args(e, 1);
    const RISolveProblem ri(grid, tg, ctx.pdas_c, ctx.pdas_max_iter);
    return solve_rate_independent(ri, eval_field(e.args[0], ctx)).z;
  }
  throw ConfigError("unknown space-time family '" + e.name + "'");
}

inline Trajectory eval_field(const std::string& text, const FamilyContext& ctx) {
  return eval_field(parse_expr(text), ctx);
}
inline Field eval_profile(const std::string& text, const FamilyContext& ctx) {
  return eval_profile(parse_expr(text), ctx);
}

// ---------------------------------------------------------------------------
// Flat dotted-key configuration
//
//   # comment
//   domain.n_interior = 199
//   control.initial   = ramp(sin(1, 4))

struct ScenarioConfig {
  double length = 1.0;
  std::size_t n_interior = 49;
  double horizon = 1.0;
  std::size_t n_steps = 100;

  double rho = 1e-2;
  bool has_schedule = false;
  double rho_init = 1e-1;
  double factor = 0.1;
  std::size_t n_levels = 1;

  double alpha = 0.0;
  double beta = 0.0;
  std::string z_d = "zero";
  std::string z_T = "zero";

  std::string control_initial = "zero";
  std::string control_anchor = "zero";
  double prox_weight = 0.0;

  double newton_tol = 1e-11;
  std::size_t newton_max_iter = 200;
  double pdas_c = 1.0;
  std::size_t pdas_max_iter = 100;
  double inner_tol = 1e-8;
  std::size_t inner_max_iter = 500;
  double delta = std::numeric_limits<double>::infinity();

  std::vector<double> study_rhos{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  std::string study_load;  ///< empty: use control.initial

  std::vector<double> grad_eps{1e-2, 1e-3, 1e-4, 1e-5};
  std::string grad_direction = "cycle(0.75, sum(sin(2, 1), bump(0.3, 0.2, 1)))";

  AuditOptions audit{};

  std::string output_directory = "out";
  std::set<std::string> formats{"csv", "json"};

  std::string base_dir;  ///< directory of the config file
  std::map<std::string, std::string> raw;  ///< as read, for the resolved-config dump

  [[nodiscard]] SpatialGrid grid() const { return SpatialGrid(length, n_interior); }
  [[nodiscard]] TimeGrid time_grid() const { return TimeGrid(horizon, n_steps); }
  [[nodiscard]] FamilyContext context() const { return {grid(), time_grid(), pdas_c, pdas_max_iter, base_dir}; }
  [[nodiscard]] RegStateProblem reg_problem(double r) const {
    return RegStateProblem(grid(), time_grid(), SmoothedAbs(r), newton_tol, newton_max_iter);
  }
  [[nodiscard]] RISolveProblem ri_problem() const { return RISolveProblem(grid(), time_grid(), pdas_c, pdas_max_iter); }
  [[nodiscard]] ContinuationSchedule schedule() const {
    ContinuationSchedule s;
    s.rho_init = has_schedule ? rho_init : rho;
    s.factor = factor;
    s.n_levels = has_schedule ? n_levels : 1;
    s.inner_tol = inner_tol;
    s.inner_max_iter = inner_max_iter;
    s.delta = delta;
    return s;
  }

  /// Replaces the smoothing parameter (and the first continuation level).
  void override_rho(double r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("--rho must be a positive number");
    rho = r;
    rho_init = r;
    raw["smoothing.rho"] = format_real(r);
    if (has_schedule) raw["smoothing.rho_init"] = format_real(r);
  }

  [[nodiscard]] ObjectiveSpec objective() const {
    const auto ctx = context();
    ObjectiveSpec spec{alpha, beta, eval_field(z_d, ctx), eval_profile(z_T, ctx)};
    spec.check(ctx.tg, ctx.grid);
    return spec;
  }

  /// Resolved config text; parsing it again yields the same scenario.
  [[nodiscard]] std::string dump() const {
    std::ostringstream os;
    for (const auto& [k, v] : raw) os << k << " = " << v << '\n';
    return os.str();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  if (std::isnan(x)) throw ConfigError(key + ": NaN not allowed");
  return x;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || x < 0)
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline void positive(const std::string& key, double x) {
  if (!(x > 0.0)) throw ConfigError(key + " must be positive");
}

}  // namespace detail

/// Parses config text. Unknown keys and malformed values raise ConfigError.
inline ScenarioConfig parse_config(const std::string& text, const std::string& base_dir = "") {
  using namespace detail;
  ScenarioConfig c;
  c.base_dir = base_dir;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (c.raw.count(key) != 0) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + key);
    c.raw[key] = val;

    if (key == "domain.length") c.length = parse_real(key, val);
    else if (key == "domain.n_interior") c.n_interior = parse_count(key, val);
    else if (key == "time.horizon") c.horizon = parse_real(key, val);
    else if (key == "time.n_steps") c.n_steps = parse_count(key, val);
    else if (key == "smoothing.rho") c.rho = parse_real(key, val);
    else if (key == "smoothing.rho_init") { c.rho_init = parse_real(key, val); c.has_schedule = true; }
    else if (key == "smoothing.factor") { c.factor = parse_real(key, val); c.has_schedule = true; }
    else if (key == "smoothing.n_levels") { c.n_levels = parse_count(key, val); c.has_schedule = true; }
    else if (key == "objective.alpha") c.alpha = parse_real(key, val);
    else if (key == "objective.beta") c.beta = parse_real(key, val);
    else if (key == "objective.z_d") c.z_d = val;
    else if (key == "objective.z_T") c.z_T = val;
    else if (key == "control.initial") c.control_initial = val;
    else if (key == "control.anchor") c.control_anchor = val;
    else if (key == "control.prox_weight") c.prox_weight = parse_real(key, val);
    else if (key == "solver.newton_tol") c.newton_tol = parse_real(key, val);
    else if (key == "solver.newton_max_iter") c.newton_max_iter = parse_count(key, val);
    else if (key == "solver.pdas_c") c.pdas_c = parse_real(key, val);
    else if (key == "solver.pdas_max_iter") c.pdas_max_iter = parse_count(key, val);
    else if (key == "solver.inner_tol") c.inner_tol = parse_real(key, val);
    else if (key == "solver.inner_max_iter") c.inner_max_iter = parse_count(key, val);
    else if (key == "solver.delta") c.delta = parse_real(key, val);
    else if (key == "study.rhos") c.study_rhos = parse_list(key, val);
    else if (key == "study.load") c.study_load = val;
    else if (key == "grad_check.eps") c.grad_eps = parse_list(key, val);
    else if (key == "grad_check.direction") c.grad_direction = val;
    else if (key == "verify.rate_eps_rel") c.audit.thresholds.rate_eps_rel = parse_real(key, val);
    else if (key == "verify.gap_eps") c.audit.thresholds.gap_eps = parse_real(key, val);
    else if (key == "verify.q_tol_rel") c.audit.thresholds.q_tol_rel = parse_real(key, val);
    else if (key == "verify.xi_tol_rel") c.audit.thresholds.xi_tol_rel = parse_real(key, val);
    else if (key == "verify.n_time_tests") c.audit.n_time_tests = parse_count(key, val);
    else if (key == "verify.n_space_tests") c.audit.n_space_tests = parse_count(key, val);
    else if (key == "verify.tol_discretization") c.audit.tol_discretization = parse_real(key, val);
    else if (key == "output.directory") c.output_directory = val;
    else if (key == "output.formats") {
      c.formats.clear();
      std::stringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item != "csv" && item != "json") throw ConfigError(key + ": unknown format '" + item + "'");
        c.formats.insert(item);
      }
    } else {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }

  positive("domain.length", c.length);
  if (c.n_interior < 2) throw ConfigError("domain.n_interior must be >= 2");
  positive("time.horizon", c.horizon);
  if (c.n_steps < 2) throw ConfigError("time.n_steps must be >= 2");
  positive("smoothing.rho", c.rho);
  positive("smoothing.rho_init", c.rho_init);
  if (!(c.factor > 0.0 && c.factor < 1.0)) throw ConfigError("smoothing.factor must lie in (0, 1)");
  if (c.n_levels < 1) throw ConfigError("smoothing.n_levels must be >= 1");
  if (c.alpha < 0.0 || c.beta < 0.0) throw ConfigError("objective weights must be >= 0");
  if (c.prox_weight < 0.0) throw ConfigError("control.prox_weight must be >= 0");
  positive("solver.newton_tol", c.newton_tol);
  if (c.newton_max_iter < 1) throw ConfigError("solver.newton_max_iter must be >= 1");
  positive("solver.pdas_c", c.pdas_c);
  if (c.pdas_max_iter < 1) throw ConfigError("solver.pdas_max_iter must be >= 1");
  positive("solver.inner_tol", c.inner_tol);
  positive("solver.delta", c.delta);
  for (double r : c.study_rhos) positive("study.rhos", r);
  for (double e : c.grad_eps) positive("grad_check.eps", e);
  positive("verify.tol_discretization", c.audit.tol_discretization);
  if (c.audit.n_time_tests < 1 || c.audit.n_space_tests < 1) throw ConfigError("verify test basis must be nonempty");
  if (c.output_directory.empty()) throw ConfigError("output.directory must not be empty");
  // Family strings are checked for syntax up front; evaluation happens on demand.
  for (const auto* s : {&c.z_d, &c.z_T, &c.control_initial, &c.control_anchor, &c.grad_direction})
    (void)parse_expr(*s);
  if (!c.study_load.empty()) (void)parse_expr(c.study_load);
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  const auto slash = path.find_last_of('/');
  return parse_config(ss.str(), slash == std::string::npos ? "" : path.substr(0, slash));
}

}  // namespace ripvisc
