#include "sweep/errors.hpp"

namespace sweep {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_parameter: return "unknown_parameter";
    case ErrorCode::missing_parameter: return "missing_parameter";
    case ErrorCode::type_mismatch: return "type_mismatch";
    case ErrorCode::validation: return "validation";
    case ErrorCode::duplicate_key: return "duplicate_key";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::unknown_host: return "unknown_host";
    case ErrorCode::illegal_transition: return "illegal_transition";
    case ErrorCode::already_sealed: return "already_sealed";
    case ErrorCode::submit_rejected: return "submit_rejected";
    case ErrorCode::backend_unreachable: return "backend_unreachable";
    case ErrorCode::transport_failure: return "transport_failure";
    case ErrorCode::archive_missing: return "archive_missing";
    case ErrorCode::corrupt_archive: return "corrupt_archive";
    case ErrorCode::malformed_status_file: return "malformed_status_file";
    case ErrorCode::scope_mismatch: return "scope_mismatch";
    case ErrorCode::target_not_ready: return "target_not_ready";
    case ErrorCode::corrupt_snapshot: return "corrupt_snapshot";
    case ErrorCode::digest_conflict: return "digest_conflict";
    case ErrorCode::read_only: return "read_only";
  }
  return "unknown";
}

}  // namespace sweep
