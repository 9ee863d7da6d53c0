#ifndef SCREENLAB_ERRORS_HPP
#define SCREENLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace screenlab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Degenerate or otherwise unusable lattice.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a precondition (basis mismatch, complex field where a
/// real one is required, non-positive temperature, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Eigensolver, root finder or factorization failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A fixed-point iteration blew up.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, int iteration, double dominant_q)
      : NumericalError(what), iteration_(iteration), dominant_q_(dominant_q) {}

  int iteration() const { return iteration_; }
  /// |q| of the largest residual coefficient at the time of divergence.
  double dominant_q() const { return dominant_q_; }

 private:
  int iteration_;
  double dominant_q_;
};

/// Post-processing could not be carried out on the supplied data.
class AnalysisError : public Error {
 public:
  using Error::Error;
};

/// Malformed run configuration; carries the offending line (0 if none).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace screenlab

#endif  // SCREENLAB_ERRORS_HPP
