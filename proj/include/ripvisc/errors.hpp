#pragma once

#include <stdexcept>
#include <string>

namespace ripvisc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (mismatched sizes, bad parameters).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Damped Newton for the rate resolvent did not reach its tolerance.
class NewtonDivergence : public Error {
 public:
  using Error::Error;
};

/// The initial load violates sup|g(0)| <= 1.
class CompatibilityViolation : public Error {
 public:
  using Error::Error;
};

/// Primal-dual active sets kept changing for every retried prediction constant.
class PdasCycle : public Error {
 public:
  using Error::Error;
};

/// Armijo backtracking reached the minimal step without decrease.
class LineSearchStall : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario configuration or input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

}  // namespace ripvisc
