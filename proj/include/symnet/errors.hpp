#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace symnet {

// Root of every error thrown by the library. The CLI maps the three families
// below onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- configuration / precondition family (exit code 2) ---------------------

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ArchitectureMismatchError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class PreconditionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class MissingLatentError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class LabelError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// --- numeric / convergence family (exit code 3) ----------------------------

class NumericError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(int epoch, const std::string& what)
      : NumericError("diverged at epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class DegenerateUnitError : public NumericError {
 public:
  DegenerateUnitError(std::size_t layer, std::size_t unit)
      : NumericError("unit " + std::to_string(unit) + " of layer " +
                     std::to_string(layer) + " has zero incoming norm"),
        layer_(layer),
        unit_(unit) {}
  std::size_t layer() const noexcept { return layer_; }
  std::size_t unit() const noexcept { return unit_; }

 private:
  std::size_t layer_;
  std::size_t unit_;
};

class NormPreconditionError : public NumericError {
 public:
  using NumericError::NumericError;
};

class AntipodalError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegeneratePlaneError : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonConvergenceError : public NumericError {
 public:
  NonConvergenceError(double achieved, const std::string& what)
      : NumericError(what + " (achieved train error " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved_error() const noexcept { return achieved_; }

 private:
  double achieved_;
};

// --- I/O family (exit code 4) ----------------------------------------------

class IoError : public Error {
 public:
  using Error::Error;
};

class IdxBadMagicError : public IoError {
 public:
  using IoError::IoError;
};

class IdxTruncatedError : public IoError {
 public:
  using IoError::IoError;
};

class IdxDimensionOverflowError : public IoError {
 public:
  using IoError::IoError;
};

class SchemaVersionError : public IoError {
 public:
  using IoError::IoError;
};

class PayloadLengthError : public IoError {
 public:
  using IoError::IoError;
};

class ChecksumError : public IoError {
 public:
  using IoError::IoError;
};

class ManifestArchitectureError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace symnet
