#pragma once

#include <stdexcept>
#include <string>

namespace sten {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor dimension mismatch; the message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Value outside its documented domain (coordinates, hours, batch sizes).
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or invalid configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure; the message names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text; the message carries the line number where known.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Too many malformed lines in an input file.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Metric undefined for the given inputs (single-class AUC, base AUC <= 0.5).
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: non-finite gradient, degenerate softmax row.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or incompatible checkpoint.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Command invoked with contradictory or unknown options.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace sten
