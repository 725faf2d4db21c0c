#pragma once

#include <stdexcept>
#include <string>

namespace cprobe {

/// Failure categories. Each maps to a distinct C API status and CLI exit code.
enum class ErrorKind {
  usage,
  config,
  provider,
  data,
  io,
  numeric,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& m) : Error(ErrorKind::usage, m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};
struct ProviderError : Error {
  explicit ProviderError(const std::string& m) : Error(ErrorKind::provider, m) {}
};
struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ErrorKind::data, m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorKind::io, m) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

}  // namespace cprobe
