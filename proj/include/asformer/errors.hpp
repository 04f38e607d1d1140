#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace asformer {

// Each kind maps onto one process exit code of the command-line tool.
enum class ErrorKind {
  kInternal = 1,
  kConfig = 2,
  kDimension = 3,
  kData = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

// Out-of-range schedule or layer index.
class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error(ErrorKind::kDimension, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

// Binary file decoding failure, positioned at a byte offset.
class ParseError : public DataError {
 public:
  enum class Reason { kBadMagic, kBadVersion, kTruncated, kNonFinite, kMalformed };

  ParseError(Reason reason, std::size_t offset, const std::string& what)
      : DataError(what + " (at byte offset " + std::to_string(offset) + ")"),
        reason_(reason),
        offset_(offset),
        detail_(what) {}

  Reason reason() const noexcept { return reason_; }
  std::size_t offset() const noexcept { return offset_; }
  // Message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Reason reason_;
  std::size_t offset_;
  std::string detail_;
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what)
      : Error(ErrorKind::kInternal, what) {}
};

}  // namespace asformer
