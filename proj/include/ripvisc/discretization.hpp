#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "ripvisc/errors.hpp"
#include "ripvisc/tridiagonal.hpp"

namespace ripvisc {

/// Nodal values of a spatial function at the interior nodes of a SpatialGrid.
using Field = Eigen::VectorXd;

/**
 * @brief Uniform finite-difference mesh of (0, L) with homogeneous Dirichlet
 * boundary values.
 *
 * Interior node i (0-based) sits at x_i = (i + 1) h. The grid owns the
 * negated second-difference matrix -L, which is symmetric positive definite.
 */
class SpatialGrid {
 public:
  SpatialGrid(double length, std::size_t n_interior)
      : length_(length), n_(n_interior), h_(length / static_cast<double>(n_interior + 1)) {
    require(n_interior >= 2, "SpatialGrid: n_interior must be >= 2");
    require(length > 0.0 && std::isfinite(length), "SpatialGrid: length must be positive");
    const auto n = static_cast<Eigen::Index>(n_);
    const double inv_h2 = 1.0 / (h_ * h_);
    neg_laplacian_.diag = Eigen::VectorXd::Constant(n, 2.0 * inv_h2);
    neg_laplacian_.off = Eigen::VectorXd::Constant(n - 1, -inv_h2);
  }

  [[nodiscard]] double length() const { return length_; }
  [[nodiscard]] std::size_t n_interior() const { return n_; }
  [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(n_); }
  [[nodiscard]] double h() const { return h_; }
  [[nodiscard]] double x(Eigen::Index i) const { return static_cast<double>(i + 1) * h_; }

  /// -L as a symmetric tridiagonal matrix.
  [[nodiscard]] const SymTridiagonal& neg_laplacian() const { return neg_laplacian_; }

  [[nodiscard]] Field zeros() const { return Field::Zero(size()); }

  /// Samples f at the interior nodes.
  [[nodiscard]] Field sample(const std::function<double(double)>& f) const {
    Field u(size());
    for (Eigen::Index i = 0; i < size(); ++i) u[i] = f(x(i));
    return u;
  }

  void check(const Field& u, const char* who) const {
    if (u.size() != size()) throw ContractViolation(std::string(who) + ": field/grid dimension mismatch");
  }

  friend bool operator==(const SpatialGrid& a, const SpatialGrid& b) {
    return a.n_ == b.n_ && a.length_ == b.length_;
  }

 private:
  double length_;
  std::size_t n_;
  double h_;
  SymTridiagonal neg_laplacian_;
};

/// Uniform time grid t_k = k tau, k = 0..n_steps, on [0, T].
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t n_steps)
      : horizon_(horizon), n_steps_(n_steps), tau_(horizon / static_cast<double>(n_steps)) {
    require(n_steps >= 2, "TimeGrid: n_steps must be >= 2");
    require(horizon > 0.0 && std::isfinite(horizon), "TimeGrid: horizon must be positive");
  }

  [[nodiscard]] double horizon() const { return horizon_; }
  [[nodiscard]] std::size_t n_steps() const { return n_steps_; }
  [[nodiscard]] std::size_t n_nodes() const { return n_steps_ + 1; }
  [[nodiscard]] double tau() const { return tau_; }
  [[nodiscard]] double t(std::size_t k) const { return static_cast<double>(k) * tau_; }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.n_steps_ == b.n_steps_ && a.horizon_ == b.horizon_;
  }

 private:
  double horizon_;
  std::size_t n_steps_;
  double tau_;
};

/// Time-indexed sequence of Fields; index 0 is the initial time.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(const TimeGrid& tg, const SpatialGrid& grid)
      : fields_(tg.n_nodes(), Field::Zero(grid.size())) {}
  explicit Trajectory(std::vector<Field> fields) : fields_(std::move(fields)) {}

  [[nodiscard]] std::size_t size() const { return fields_.size(); }
  [[nodiscard]] Eigen::Index n_space() const { return fields_.empty() ? 0 : fields_.front().size(); }
  Field& operator[](std::size_t k) { return fields_[k]; }
  const Field& operator[](std::size_t k) const { return fields_[k]; }
  [[nodiscard]] const Field& back() const { return fields_.back(); }
  [[nodiscard]] auto begin() const { return fields_.begin(); }
  [[nodiscard]] auto end() const { return fields_.end(); }

  /// Throws unless the trajectory has one field of grid size per time node.
  void check(const TimeGrid& tg, const SpatialGrid& grid, const char* who) const {
    if (fields_.size() != tg.n_nodes())
      throw ContractViolation(std::string(who) + ": trajectory/time grid mismatch");
    for (const auto& f : fields_) grid.check(f, who);
  }

  [[nodiscard]] double max_abs() const {
    double m = 0.0;
    for (const auto& f : fields_)
      if (f.size() > 0) m = std::max(m, f.cwiseAbs().maxCoeff());
    return m;
  }

  Trajectory& operator+=(const Trajectory& o) {
    require(o.size() == size(), "Trajectory: size mismatch");
    for (std::size_t k = 0; k < size(); ++k) fields_[k] += o.fields_[k];
    return *this;
  }
  Trajectory& operator-=(const Trajectory& o) {
    require(o.size() == size(), "Trajectory: size mismatch");
    for (std::size_t k = 0; k < size(); ++k) fields_[k] -= o.fields_[k];
    return *this;
  }
  Trajectory& operator*=(double s) {
    for (auto& f : fields_) f *= s;
    return *this;
  }
  friend Trajectory operator+(Trajectory a, const Trajectory& b) { return a += b; }
  friend Trajectory operator-(Trajectory a, const Trajectory& b) { return a -= b; }
  friend Trajectory operator*(double s, Trajectory a) { return a *= s; }

  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k].size() != b[k].size() || a[k] != b[k]) return false;
    return true;
  }

 private:
  std::vector<Field> fields_;
};

// ---------------------------------------------------------------------------
// Spatial operators and norms

/// Second-difference operator with zero boundary values.
inline Field laplacian_apply(const SpatialGrid& grid, const Field& u) {
  grid.check(u, "laplacian_apply");
  return -grid.neg_laplacian().apply(u);
}

/// Inverse of laplacian_apply (direct tridiagonal solve).
inline Field laplacian_solve(const SpatialGrid& grid, const Field& f) {
  grid.check(f, "laplacian_solve");
  return -solve_tridiagonal(grid.neg_laplacian(), f);
}

/// Discrete L2 pairing h * sum_i u_i v_i; also the H^{-1}/H^1_0 duality.
inline double inner_l2(const SpatialGrid& grid, const Field& u, const Field& v) {
  grid.check(u, "inner_l2");
  grid.check(v, "inner_l2");
  return grid.h() * u.dot(v);
}

inline double inner_h10(const SpatialGrid& grid, const Field& u, const Field& v) {
  grid.check(v, "inner_h10");
  return grid.h() * grid.neg_laplacian().apply(u).dot(v);
}

inline double norm_l2(const SpatialGrid& grid, const Field& u) { return std::sqrt(inner_l2(grid, u, u)); }

inline double norm_h10(const SpatialGrid& grid, const Field& u) {
  grid.check(u, "norm_h10");
  // sum of squared forward differences including both boundary links
  const Eigen::Index n = u.size();
  double s = u[0] * u[0] + u[n - 1] * u[n - 1];
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double d = u[i + 1] - u[i];
    s += d * d;
  }
  return std::sqrt(s / grid.h());
}

/// Dual norm: ||u||_{H^-1} = ||L^{-1} u||_{H^1_0}.
inline double norm_hm1(const SpatialGrid& grid, const Field& u) {
  return norm_h10(grid, laplacian_solve(grid, u));
}

inline double inner_hm1(const SpatialGrid& grid, const Field& u, const Field& v) {
  return -inner_l2(grid, laplacian_solve(grid, u), v);
}

// ---------------------------------------------------------------------------
// Time-discrete (Bochner) norms

/// Backward differences (u_{k+1} - u_k) / tau for k = 0..n_steps-1.
inline std::vector<Field> time_differences(const TimeGrid& tg, const Trajectory& u) {
  require(u.size() == tg.n_nodes(), "time_differences: trajectory/time grid mismatch");
  std::vector<Field> d;
  d.reserve(tg.n_steps());
  for (std::size_t k = 0; k < tg.n_steps(); ++k) d.push_back((u[k + 1] - u[k]) / tg.tau());
  return d;
}

/// Left-rectangle L2-in-time norm of the pointwise norm `nf` over k = 0..n_steps-1.
template <class NormFn>
double time_l2(const TimeGrid& tg, const Trajectory& u, NormFn&& nf) {
  double s = 0.0;
  for (std::size_t k = 0; k < tg.n_steps(); ++k) {
    const double v = nf(u[k]);
    s += tg.tau() * v * v;
  }
  return std::sqrt(s);
}

template <class NormFn>
double time_linf(const Trajectory& u, NormFn&& nf) {
  double m = 0.0;
  for (const auto& f : u) m = std::max(m, nf(f));
  return m;
}

struct BochnerNorms {
  double l2_h10 = 0.0;   ///< L2(I; H^1_0)
  double linf_h10 = 0.0; ///< C(I; H^1_0), max over all nodes
  double h1_l2 = 0.0;    ///< H1(I; L2)
  double w11_hm1 = 0.0;  ///< W^{1,1}(I; H^-1)
};

inline BochnerNorms bochner_norms(const TimeGrid& tg, const SpatialGrid& grid, const Trajectory& u) {
  u.check(tg, grid, "bochner_norms");
  const auto h10 = [&](const Field& f) { return norm_h10(grid, f); };
  const auto diffs = time_differences(tg, u);

  BochnerNorms out;
  out.l2_h10 = time_l2(tg, u, h10);
  out.linf_h10 = time_linf(u, h10);
  double mass = 0.0;
  double stiff = 0.0;
  double w11 = 0.0;
  for (std::size_t k = 0; k < tg.n_steps(); ++k) {
    mass += tg.tau() * inner_l2(grid, u[k], u[k]);
    stiff += tg.tau() * inner_l2(grid, diffs[k], diffs[k]);
    w11 += tg.tau() * (norm_hm1(grid, u[k]) + norm_hm1(grid, diffs[k]));
  }
  out.h1_l2 = std::sqrt(mass + stiff);
  out.w11_hm1 = w11;
  return out;
}

// ---------------------------------------------------------------------------
// Control metric on H^1_*(I; L2) = {g in H1(I; L2) : g(0) = 0}

/// Mass pairing over the free nodes: sum_{k=1}^{N} tau <a_k, b_k>_{L2}.
inline double control_mass_pairing(const TimeGrid& tg, const SpatialGrid& grid, const Trajectory& a,
                                   const Trajectory& b) {
  require(a.size() == tg.n_nodes() && b.size() == tg.n_nodes(), "control_mass_pairing: size mismatch");
  double s = 0.0;
  for (std::size_t k = 1; k <= tg.n_steps(); ++k) s += inner_l2(grid, a[k], b[k]);
  return tg.tau() * s;
}

/// H^1_* inner product: right-endpoint mass plus backward-difference stiffness.
inline double h1star_inner(const TimeGrid& tg, const SpatialGrid& grid, const Trajectory& a,
                           const Trajectory& b) {
  double stiff = 0.0;
  for (std::size_t k = 0; k < tg.n_steps(); ++k)
    stiff += inner_l2(grid, a[k + 1] - a[k], b[k + 1] - b[k]);
  return control_mass_pairing(tg, grid, a, b) + stiff / tg.tau();
}

inline double h1star_norm(const TimeGrid& tg, const SpatialGrid& grid, const Trajectory& a) {
  return std::sqrt(std::max(0.0, h1star_inner(tg, grid, a, a)));
}

}  // namespace ripvisc
