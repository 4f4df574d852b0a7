#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nuig {

enum class ErrorKind {
  shape,
  target,
  domain,
  config,
  parse,
  convergence,
  transport,
  provider,
  validation,
  measurement,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape: return "shape";
    case ErrorKind::target: return "target";
    case ErrorKind::domain: return "domain";
    case ErrorKind::config: return "config";
    case ErrorKind::parse: return "parse";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::transport: return "transport";
    case ErrorKind::provider: return "provider";
    case ErrorKind::validation: return "validation";
    case ErrorKind::measurement: return "measurement";
  }
  return "unknown";
}

/// Base of every error raised by the engine. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a doubling search exhausts its budget. Carries the best point seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::size_t best_m, double best_delta)
      : Error(ErrorKind::convergence, what), best_m_(best_m), best_delta_(best_delta) {}

  std::size_t best_m() const noexcept { return best_m_; }
  double best_delta() const noexcept { return best_delta_; }

 private:
  std::size_t best_m_;
  double best_delta_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace nuig
