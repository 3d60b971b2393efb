#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace slotkit {

enum class ErrorKind {
  // data / parsing
  MissingSchema,
  MalformedJson,
  UnknownService,
  IdSpaceExhausted,
  Io,
  MalformedLine,
  MalformedClause,
  EmptyBank,
  MixedLibrary,
  BudgetImpossible,
  EmptyScoreSet,
  InvalidRecord,
  Config,
  // backend / network
  Timeout,
  HttpStatus,
  AuthMissing,
  MalformedResponse,
  Backend,
  // service
  SessionNotFound,
};

constexpr std::string_view error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::MissingSchema: return "MissingSchema";
    case ErrorKind::MalformedJson: return "MalformedJson";
    case ErrorKind::UnknownService: return "UnknownService";
    case ErrorKind::IdSpaceExhausted: return "IdSpaceExhausted";
    case ErrorKind::Io: return "Io";
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::MalformedClause: return "MalformedClause";
    case ErrorKind::EmptyBank: return "EmptyBank";
    case ErrorKind::MixedLibrary: return "MixedLibrary";
    case ErrorKind::BudgetImpossible: return "BudgetImpossible";
    case ErrorKind::EmptyScoreSet: return "EmptyScoreSet";
    case ErrorKind::InvalidRecord: return "InvalidRecord";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::HttpStatus: return "HttpStatus";
    case ErrorKind::AuthMissing: return "AuthMissing";
    case ErrorKind::MalformedResponse: return "MalformedResponse";
    case ErrorKind::Backend: return "Backend";
    case ErrorKind::SessionNotFound: return "SessionNotFound";
  }
  return "Unknown";
}

// Single exception type for all toolkit failures; `kind` tells callers (and
// the CLI's --json-errors path) what went wrong without a class per error.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view kind_name() const noexcept { return error_kind_name(kind_); }

 private:
  ErrorKind kind_;
};

// True for failures of the completion backend itself (retryable territory),
// as opposed to data or usage errors.
inline bool is_backend_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::Timeout:
    case ErrorKind::HttpStatus:
    case ErrorKind::AuthMissing:
    case ErrorKind::MalformedResponse:
    case ErrorKind::Backend:
      return true;
    default:
      return false;
  }
}

}  // namespace slotkit
