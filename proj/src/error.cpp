#include "qkdrelay/error.hpp"

namespace qkdrelay {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::UnsupportedParams: return "UnsupportedParams";
    case ErrorCode::MalformedPublicKey: return "MalformedPublicKey";
    case ErrorCode::DecapsulationFailure: return "DecapsulationFailure";
    case ErrorCode::BadKeyLength: return "BadKeyLength";
    case ErrorCode::InsufficientKey: return "InsufficientKey";
    case ErrorCode::UnknownKeyId: return "UnknownKeyId";
    case ErrorCode::AlreadyConsumed: return "AlreadyConsumed";
    case ErrorCode::IncompleteView: return "IncompleteView";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::AddressInUse: return "AddressInUse";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace qkdrelay
