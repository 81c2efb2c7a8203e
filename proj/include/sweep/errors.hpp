#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sweep {

enum class ErrorCode {
  unknown_parameter,
  missing_parameter,
  type_mismatch,
  validation,
  duplicate_key,
  not_found,
  unknown_host,
  illegal_transition,
  already_sealed,
  submit_rejected,
  backend_unreachable,
  transport_failure,
  archive_missing,
  corrupt_archive,
  malformed_status_file,
  scope_mismatch,
  target_not_ready,
  corrupt_snapshot,
  digest_conflict,
  read_only,
};

/// Stable machine-readable name, e.g. "type_mismatch".
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sweep
