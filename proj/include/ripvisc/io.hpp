#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ripvisc/discretization.hpp"
#include "ripvisc/errors.hpp"
#include "ripvisc/optimizer.hpp"
#include "ripvisc/verifier.hpp"

namespace ripvisc {

/// Shortest round-trip text for a double (17 significant digits).
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Trajectory files
//
//   <n_steps> <n_interior> <T> <L> <name>
//   one line per time node, n_interior space-separated values

struct TrajectoryFile {
  std::size_t n_steps = 0;
  std::size_t n_interior = 0;
  double horizon = 0.0;
  double length = 0.0;
  std::string name;
  Trajectory data;
};

inline void write_trajectory(std::ostream& os, const TimeGrid& tg, const SpatialGrid& grid, const Trajectory& u,
                             const std::string& name) {
  u.check(tg, grid, "write_trajectory");
  require(!name.empty() && name.find_first_of(" \t\n") == std::string::npos,
          "write_trajectory: name must be a single token");
  os << tg.n_steps() << ' ' << grid.n_interior() << ' ' << format_real(tg.horizon()) << ' '
     << format_real(grid.length()) << ' ' << name << '\n';
  for (const auto& f : u) {
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      if (i > 0) os << ' ';
      os << format_real(f[i]);
    }
    os << '\n';
  }
}

inline TrajectoryFile read_trajectory(std::istream& is) {
  TrajectoryFile tf;
  std::string header;
  if (!std::getline(is, header)) throw ConfigError("trajectory file: missing header");
  std::istringstream hs(header);
  if (!(hs >> tf.n_steps >> tf.n_interior >> tf.horizon >> tf.length >> tf.name))
    throw ConfigError("trajectory file: malformed header '" + header + "'");
  std::vector<Field> fields;
  fields.reserve(tf.n_steps + 1);
  std::string line;
  for (std::size_t k = 0; k <= tf.n_steps; ++k) {
    if (!std::getline(is, line)) throw ConfigError("trajectory file: expected " + std::to_string(tf.n_steps + 1) + " rows");
    std::istringstream ls(line);
    Field f(static_cast<Eigen::Index>(tf.n_interior));
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      std::string tok;
      if (!(ls >> tok)) throw ConfigError("trajectory file: short row " + std::to_string(k));
      char* end = nullptr;
      f[i] = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0' || !std::isfinite(f[i]))
        throw ConfigError("trajectory file: bad value '" + tok + "' in row " + std::to_string(k));
    }
    std::string extra;
    if (ls >> extra) throw ConfigError("trajectory file: long row " + std::to_string(k));
    fields.push_back(std::move(f));
  }
  tf.data = Trajectory(std::move(fields));
  return tf;
}

inline void save_trajectory(const std::string& path, const TimeGrid& tg, const SpatialGrid& grid,
                            const Trajectory& u, const std::string& name) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  write_trajectory(os, tg, grid, u, name);
}

inline TrajectoryFile load_trajectory(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  return read_trajectory(is);
}

/// Loads a trajectory and checks it against the expected grids.
inline Trajectory load_trajectory_on(const std::string& path, const TimeGrid& tg, const SpatialGrid& grid) {
  auto tf = load_trajectory(path);
  if (tf.n_steps != tg.n_steps() || tf.n_interior != grid.n_interior() || tf.horizon != tg.horizon() ||
      tf.length != grid.length())
    throw ConfigError(path + ": grid in file does not match the scenario");
  return std::move(tf.data);
}

// ---------------------------------------------------------------------------
// JSON serialization of reports

using nlohmann::json;

namespace detail {
// JSON has no NaN/inf; encode them as null and decode null back to NaN.
inline json real_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline double real_from_json(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
}  // namespace detail

inline json to_json(const LevelRecord& r) {
  json hist = json::array();
  for (double v : r.objective_history) hist.push_back(detail::real_to_json(v));
  return {{"rho", r.rho},
          {"iterations", r.iterations},
          {"objective", detail::real_to_json(r.objective)},
          {"gradient_norm", detail::real_to_json(r.gradient_norm)},
          {"anchor_distance", detail::real_to_json(r.anchor_distance)},
          {"converged", r.converged},
          {"delta_violated", r.delta_violated},
          {"drift_to_next", detail::real_to_json(r.drift_to_next)},
          {"objective_history", hist}};
}

inline LevelRecord level_from_json(const json& j) {
  LevelRecord r;
  r.rho = j.at("rho").get<double>();
  r.iterations = j.at("iterations").get<std::size_t>();
  r.objective = detail::real_from_json(j.at("objective"));
  r.gradient_norm = detail::real_from_json(j.at("gradient_norm"));
  r.anchor_distance = detail::real_from_json(j.at("anchor_distance"));
  r.converged = j.at("converged").get<bool>();
  r.delta_violated = j.at("delta_violated").get<bool>();
  r.drift_to_next = detail::real_from_json(j.at("drift_to_next"));
  for (const auto& v : j.at("objective_history")) r.objective_history.push_back(detail::real_from_json(v));
  return r;
}

/// Level table and mode of an OptimizeReport (trajectories go to separate files).
inline json to_json(const OptimizeReport& rep) {
  json levels = json::array();
  for (const auto& l : rep.levels) levels.push_back(to_json(l));
  return {{"prox_weight", rep.prox_weight}, {"levels", levels}};
}

inline OptimizeReport optimize_report_from_json(const json& j) {
  OptimizeReport rep;
  rep.prox_weight = j.at("prox_weight").get<double>();
  for (const auto& l : j.at("levels")) rep.levels.push_back(level_from_json(l));
  return rep;
}

inline json to_json(const ConditionStat& c) {
  return {{"set_size", c.set_size}, {"violations", c.violations}, {"fraction", c.fraction}, {"magnitude", c.magnitude}};
}

inline json to_json(const EstimateCheck& c) {
  return {{"name", c.name},
          {"lhs", detail::real_to_json(c.lhs)},
          {"rhs", detail::real_to_json(c.rhs)},
          {"margin", detail::real_to_json(c.margin)},
          {"asserted", c.asserted},
          {"passed", c.passed}};
}

inline json to_json(const KktReport& r) {
  const auto& s = r.sign_condition_stats;
  json checks = json::array();
  for (const auto& c : r.estimate_checks) checks.push_back(to_json(c));
  return {{"complementarity_q", r.complementarity_q},
          {"stationarity", r.stationarity},
          {"gradient_norm", r.gradient_norm},
          {"very_weak_adjoint", r.very_weak_adjoint},
          {"sign_conditions",
           {{"moving_up", to_json(s.moving_up)},
            {"stuck_upper", to_json(s.stuck_upper)},
            {"interior", to_json(s.interior)},
            {"stuck_lower", to_json(s.stuck_lower)},
            {"moving_down", to_json(s.moving_down)},
            {"unclassified", s.unclassified},
            {"total", s.total}}},
          {"estimate_checks", checks}};
}

inline json to_json(const BochnerNorms& n) {
  return {{"l2_h10", n.l2_h10}, {"linf_h10", n.linf_h10}, {"h1_l2", n.h1_l2}, {"w11_hm1", n.w11_hm1}};
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os << j.dump(2) << '\n';
}

}  // namespace ripvisc
