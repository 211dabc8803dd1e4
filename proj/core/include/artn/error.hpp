#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace artn {

enum class ErrorCode {
  DegenerateInput,
  InvalidWaypoint,
  InvalidTrack,
  ShapeMismatch,
  NonFiniteLoss,
  BadMagic,
  VersionMismatch,
  Cancelled,
  ProgramError,
  TrackMismatch,
  UnknownModel,
  UnknownTrack,
  UnknownId,
  CorruptRecord,
  ModelBusy,
  ValidationFailed,
  Io,
  BadRequest,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every module reports failures through this one exception type so callers
// (CLI, server) can map codes to exit statuses / HTTP classes uniformly.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace artn
