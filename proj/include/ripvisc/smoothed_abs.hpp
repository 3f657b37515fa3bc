#pragma once

#include <algorithm>
#include <cmath>

#include "ripvisc/errors.hpp"

namespace ripvisc {

/**
 * @brief Quadratic-spline smoothing of the modulus with width rho.
 *
 * The second derivative is the hat function 2 rho^-2 max(rho - |v|, 0); the
 * first derivative and the value are its closed-form antiderivatives, fixed
 * by first(0) = 0 and value(+-rho) = rho. Outside [-rho, rho] all three
 * coincide with |v|, sign(v) and 0.
 */
class SmoothedAbs {
 public:
  explicit SmoothedAbs(double rho) : rho_(rho) {
    require(rho > 0.0 && std::isfinite(rho), "SmoothedAbs: rho must be positive and finite");
  }

  [[nodiscard]] double rho() const { return rho_; }

  [[nodiscard]] double value(double v) const {
    const double a = std::abs(v);
    if (a >= rho_) return a;
    return rho_ / 3.0 + a * a / rho_ - a * a * a / (3.0 * rho_ * rho_);
  }

  [[nodiscard]] double first(double v) const {
    const double a = std::abs(v);
    if (a >= rho_) return v > 0.0 ? 1.0 : -1.0;
    const double s = a / rho_;
    const double m = 2.0 * s - s * s;
    return v < 0.0 ? -m : m;
  }

  [[nodiscard]] double second(double v) const {
    return 2.0 / (rho_ * rho_) * std::max(rho_ - std::abs(v), 0.0);
  }

 private:
  double rho_;
};

}  // namespace ripvisc
