#include "artn/error.hpp"

namespace artn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InvalidWaypoint: return "InvalidWaypoint";
    case ErrorCode::InvalidTrack: return "InvalidTrack";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::Cancelled: return "Cancelled";
    case ErrorCode::ProgramError: return "ProgramError";
    case ErrorCode::TrackMismatch: return "TrackMismatch";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::UnknownTrack: return "UnknownTrack";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::ModelBusy: return "ModelBusy";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadRequest: return "BadRequest";
  }
  return "Unknown";
}

}  // namespace artn
