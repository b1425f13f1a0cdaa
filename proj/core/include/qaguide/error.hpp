#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qaguide {

enum class ErrorKind {
  kIo,
  kParse,
  kValidation,
  kDuplicateId,
  kDanglingReference,
  kMarkerCollision,
  kTransport,
  kTimeout,
  kHttpStatus,
  kSchema,
  kEmptyOutput,
  kEmptyReference,
  kMissingAnswers,
  kLengthMismatch,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by model backends. Carries the HTTP status when one was received.
class BackendError : public Error {
 public:
  BackendError(ErrorKind kind, const std::string& message, int status = 0,
               int attempts = 1)
      : Error(kind, message), status_(status), attempts_(attempts) {}

  int status() const noexcept { return status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int status_;
  int attempts_;
};

}  // namespace qaguide
