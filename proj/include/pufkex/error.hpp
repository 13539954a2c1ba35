#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pufkex {

enum class ErrorCode {
    BadHex,
    LowOrderResult,
    MalformedPoint,
    LengthExceeded,
    BadSize,
    InsufficientEntropy,
    InvalidArgument,
    SizeMismatch,
    DecodeAmbiguous,
    ReconstructFailed,
    MalformedCertificate,
    MalformedMessage,
    EnrollmentFailed,
    VariantMismatch,
    InvalidState,
    CertInvalid,
    NotFound,
    Revoked,
    CorruptLog,
    Io,
};

std::string_view errorCodeName(ErrorCode code);

class Error : public std::runtime_error
{
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(errorCodeName(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace pufkex
