#include "mcae/error.hpp"

namespace mcae {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::InvalidRle: return "InvalidRle";
    case ErrorCode::TileOutOfRange: return "TileOutOfRange";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::NotUnitNorm: return "NotUnitNorm";
    case ErrorCode::MissingFeature: return "MissingFeature";
    case ErrorCode::UnknownCluster: return "UnknownCluster";
    case ErrorCode::UnknownMask: return "UnknownMask";
    case ErrorCode::NotAMember: return "NotAMember";
    case ErrorCode::InvalidClass: return "InvalidClass";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Invariant: return "Invariant";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config: return 2;
    case ErrorCode::Invariant: return 4;
    default: return 3;
  }
}

}  // namespace mcae
