// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace distad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Too few distinct values to place the requested number of knots.
class DegenerateGrid : public Error {
 public:
  using Error::Error;
};

/// An event arrived for an aggregation window that was already closed.
class LateEvent : public Error {
 public:
  LateEvent(const std::string& what, long long timestamp, double value)
      : Error(what), timestamp_(timestamp), value_(value) {}

  long long timestamp() const noexcept { return timestamp_; }
  double value() const noexcept { return value_; }

 private:
  long long timestamp_;
  double value_;
};

/// A metric was requested on input for which it is not defined (e.g. AUC on one class).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Detector or checkpoint state inconsistent with the model it is used with.
class StateCorrupt : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace distad
