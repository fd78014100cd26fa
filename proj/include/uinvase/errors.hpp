#pragma once

#include <stdexcept>
#include <string>

namespace uinvase {

// Base of every error raised by the library. Subclasses map onto the CLI
// exit-code contract (see tools/cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent network / run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad input values: non-finite features, malformed files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API precondition (shape mismatch, index out of range).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Non-finite gradient or loss during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Metric is undefined for the given labels (e.g. a single class).
class MetricError : public Error {
 public:
  using Error::Error;
};

// A file the command needs (checkpoint, dataset) does not exist.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace uinvase
