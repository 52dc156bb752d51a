#pragma once

#include <stdexcept>
#include <string>

namespace cdae {

/// Error classes. Each maps onto one process exit code of the command-line tool.
enum class ErrorKind {
  kConfig = 2,
  kData = 3,
  kShape = 4,
  kDivergence = 5,
  kMetric = 6,
  kUsage = 1,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

/// Ingestion, parsing and file-format failures.
struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

/// Malformed or unsupported serialized files (bad magic, truncation).
struct FormatError : DataError {
  explicit FormatError(const std::string& what) : DataError(what) {}
};

/// File written by a newer format version than this build understands.
struct VersionError : FormatError {
  explicit VersionError(const std::string& what) : FormatError(what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kShape, what) {}
};

struct DivergenceError : Error {
  explicit DivergenceError(const std::string& what) : Error(ErrorKind::kDivergence, what) {}
};

struct MetricError : Error {
  explicit MetricError(const std::string& what) : Error(ErrorKind::kMetric, what) {}
};

/// API misuse, e.g. a backward call with a missing or stale forward cache.
struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorKind::kUsage, what) {}
};

}  // namespace cdae
