#include "recipesnap/error.hpp"

namespace recipesnap {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::NonFinite: return "NonFinite";
    case Errc::InvalidDimension: return "InvalidDimension";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::NotFound: return "NotFound";
    case Errc::IoError: return "IoError";
    case Errc::FormatError: return "FormatError";
    case Errc::ConsistencyError: return "ConsistencyError";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::SameIndex: return "SameIndex";
    case Errc::BatchTooSmall: return "BatchTooSmall";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::InvalidK: return "InvalidK";
    case Errc::EmptyLibrary: return "EmptyLibrary";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::PoolTooLarge: return "PoolTooLarge";
    case Errc::MissingTrueId: return "MissingTrueId";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace recipesnap
