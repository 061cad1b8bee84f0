#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qkdrelay {

enum class ErrorCode {
  LengthMismatch,
  OutOfRange,
  UnsupportedParams,
  MalformedPublicKey,
  DecapsulationFailure,
  BadKeyLength,
  InsufficientKey,
  UnknownKeyId,
  AlreadyConsumed,
  IncompleteView,
  ParseError,
  ValidationError,
  AddressInUse,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (and the key-delivery protocol) can map it without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qkdrelay
