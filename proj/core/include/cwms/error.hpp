#pragma once

#include <stdexcept>
#include <string>

namespace cwms {

enum class ErrorKind {
  InvalidArgument,
  NotFound,
  Conflict,
  Format,
  Io,
  Precondition,
};

/// Library-wide exception. The kind lets adapters (CLI, HTTP) map failures
/// onto exit codes and status codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cwms
