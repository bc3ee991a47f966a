#pragma once

#include <stdexcept>
#include <string>

namespace ddpc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible matrix/vector shapes or a too-short trajectory.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A rank condition (persistency of excitation, IV rank, empty null space) failed.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Non-convergence, singular systems, non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Config parse or validation failure (maps to CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline std::string shape_str(long rows, long cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace ddpc
