#ifndef ARTID_ERRORS_HPP_
#define ARTID_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace artid {

// Error taxonomy. The three direct subclasses of Error map onto the CLI
// exit codes: ConfigError -> 2, DataError -> 3, NumericError -> 4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (bad header, unparsable line).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Recognized container, unsupported encoding (e.g. 24-bit or float WAV).
class UnsupportedFormatError : public DataError {
 public:
  using DataError::DataError;
};

// Checkpoint and cache files that cannot be read back.
class PersistenceError : public DataError {
 public:
  using DataError::DataError;
};

// Input too short for the requested analysis window or segmentation.
class InsufficientInputError : public DataError {
 public:
  using DataError::DataError;
};

// Tensor or layer dimensions inconsistent with the configuration.
class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Evaluation preconditions violated (e.g. a score class missing for EER).
class EvaluationError : public DataError {
 public:
  using DataError::DataError;
};

// Zero-norm vector where a unit-sphere projection is required.
class DegenerateEmbeddingError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Training aborted because embeddings stayed collapsed past patience.
class CollapseError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Forward cache and parameters do not belong together.
class StateError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace artid

#endif  // ARTID_ERRORS_HPP_
