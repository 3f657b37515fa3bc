#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "ripvisc/errors.hpp"

namespace ripvisc {

/// Symmetric tridiagonal matrix stored by its diagonal and off-diagonal.
/// `off[i]` couples rows i and i+1, so `off.size() == diag.size() - 1`.
struct SymTridiagonal {
  Eigen::VectorXd diag;
  Eigen::VectorXd off;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(diag.size()); }

  [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    require(x.size() == diag.size(), "SymTridiagonal::apply: dimension mismatch");
    const Eigen::Index n = diag.size();
    Eigen::VectorXd y = diag.cwiseProduct(x);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      y[i] += off[i] * x[i + 1];
      y[i + 1] += off[i] * x[i];
    }
    return y;
  }
};

/// Thomas algorithm without pivoting. Callers only pass definite or
/// diagonally dominant systems, where elimination is stable.
inline Eigen::VectorXd solve_tridiagonal(const SymTridiagonal& a, const Eigen::VectorXd& rhs) {
  const Eigen::Index n = a.diag.size();
  require(rhs.size() == n, "solve_tridiagonal: dimension mismatch");
  require(a.off.size() == (n > 0 ? n - 1 : 0), "solve_tridiagonal: bad off-diagonal length");
  if (n == 0) return Eigen::VectorXd();

  Eigen::VectorXd c_star(n);
  Eigen::VectorXd d_star(n);
  double pivot = a.diag[0];
  if (pivot == 0.0) throw ContractViolation("solve_tridiagonal: zero pivot");
  c_star[0] = n > 1 ? a.off[0] / pivot : 0.0;
  d_star[0] = rhs[0] / pivot;
  for (Eigen::Index i = 1; i < n; ++i) {
    pivot = a.diag[i] - a.off[i - 1] * c_star[i - 1];
    if (pivot == 0.0) throw ContractViolation("solve_tridiagonal: zero pivot");
    c_star[i] = i + 1 < n ? a.off[i] / pivot : 0.0;
    d_star[i] = (rhs[i] - a.off[i - 1] * d_star[i - 1]) / pivot;
  }
  Eigen::VectorXd x(n);
  x[n - 1] = d_star[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = d_star[i] - c_star[i] * x[i + 1];
  return x;
}

}  // namespace ripvisc
