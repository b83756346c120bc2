#pragma once

#include <stdexcept>
#include <string>

namespace tenseg {

/// Base class for all tenseg errors. CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidArgumentError : public Error {
 public:
  explicit InvalidArgumentError(const std::string& what) : Error(what) {}
};

/// Point set does not pin down a unique rigid transform (or a segment/axis collapsed).
class DegenerateGeometryError : public Error {
 public:
  DegenerateGeometryError(const std::string& what, int rank_found)
      : Error(what), rank(rank_found) {}
  int rank;
};

/// NaN/Inf encountered while evaluating an objective or constraint.
class NumericalFailureError : public Error {
 public:
  explicit NumericalFailureError(const std::string& what) : Error(what) {}
};

class PlaneNotFoundError : public Error {
 public:
  explicit PlaneNotFoundError(const std::string& what) : Error(what) {}
};

class InitializationFailureError : public Error {
 public:
  InitializationFailureError(const std::string& what, int endcap_index)
      : Error(what), endcap(endcap_index) {}
  int endcap;
};

class InfeasibleTrajectoryError : public Error {
 public:
  explicit InfeasibleTrajectoryError(const std::string& what) : Error(what) {}
};

class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& what) : Error(what) {}
};

/// Bad or corrupt on-disk data (dataset files, trajectory files).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

/// Bad command line or config file contents.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(what) {}
};

}  // namespace tenseg
