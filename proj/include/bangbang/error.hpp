#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bangbang {

/// Failure categories. The CLI maps each one onto an exit code.
enum class ErrorKind {
  incompatible_field,
  validation,
  integration_failure,
  nonconvergence,
  precondition,
  radius_exceeded,
  not_found,
  internal,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::incompatible_field: return "incompatible_field";
    case ErrorKind::validation: return "validation";
    case ErrorKind::integration_failure: return "integration_failure";
    case ErrorKind::nonconvergence: return "nonconvergence";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::radius_exceeded: return "radius_exceeded";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace bangbang
