#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fullcc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class EmptySector : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Iterative eigensolver or operator-norm routine ran out of iterations.
class IterativeFailure : public Error {
 public:
  IterativeFailure(const std::string& what, double best_residual)
      : Error(what + " (best residual " + std::to_string(best_residual) + ")"),
        best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

/// The target eigenvalue is not simple, so the well-posedness theory does not apply.
class DegenerateEigenpair : public Error {
 public:
  using Error::Error;
};

/// The reference overlap of a CI vector is too small for an exponential parameterisation.
class NotIntermediatelyNormalisable : public Error {
 public:
  using Error::Error;
};

class InvalidShift : public Error {
 public:
  using Error::Error;
};

class NearSingular : public Error {
 public:
  using Error::Error;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace fullcc
