#pragma once

#include <stdexcept>
#include <string>

namespace hessfit {

// Base class for all library errors so that callers (and the C API) can
// catch everything from this library in one place.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape or size mismatch between operands.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(what) {}
};

// A linear solve or inversion hit a (numerically) singular matrix.
class SingularError : public Error {
 public:
  explicit SingularError(const std::string& what) : Error(what) {}
};

// An input required to be (semi)definite is not.
class DefinitenessError : public Error {
 public:
  explicit DefinitenessError(const std::string& what) : Error(what) {}
};

// An input required to be symmetric is not, beyond tolerance.
class SymmetryError : public Error {
 public:
  explicit SymmetryError(const std::string& what) : Error(what) {}
};

// Quasi-Newton curvature condition v'h > 0 failed.
class CurvatureError : public Error {
 public:
  explicit CurvatureError(const std::string& what) : Error(what) {}
};

// An iteration left its guaranteed convergence region.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(what) {}
};

// Bad scalar argument (step size, counts, unknown names).
class InvalidArgumentError : public Error {
 public:
  explicit InvalidArgumentError(const std::string& what) : Error(what) {}
};

}  // namespace hessfit
