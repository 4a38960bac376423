#pragma once

#include <stdexcept>
#include <string>

namespace gskgc {

enum class ErrorKind { Validation, Io, Endpoint };

/// Base error for the toolkit. The kind maps onto the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class EndpointError : public Error {
 public:
  explicit EndpointError(const std::string& what) : Error(ErrorKind::Endpoint, what) {}
};

/// 2 validation, 3 I/O, 4 endpoint exhaustion.
constexpr int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return 2;
    case ErrorKind::Io: return 3;
    case ErrorKind::Endpoint: return 4;
  }
  return 1;
}

}  // namespace gskgc
