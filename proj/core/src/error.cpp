#include "qaguide/error.hpp"

namespace qaguide {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kDuplicateId: return "duplicate_id";
    case ErrorKind::kDanglingReference: return "dangling_reference";
    case ErrorKind::kMarkerCollision: return "marker_collision";
    case ErrorKind::kTransport: return "transport";
    case ErrorKind::kTimeout: return "timeout";
    case ErrorKind::kHttpStatus: return "http_status";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kEmptyOutput: return "empty_output";
    case ErrorKind::kEmptyReference: return "empty_reference";
    case ErrorKind::kMissingAnswers: return "missing_answers";
    case ErrorKind::kLengthMismatch: return "length_mismatch";
  }
  return "unknown";
}

}  // namespace qaguide
