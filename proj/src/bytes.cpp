#include "pufkex/bytes.hpp"
#include "pufkex/error.hpp"

#include <algorithm>

#include <boost/algorithm/hex.hpp>
#include <openssl/crypto.h>

namespace pufkex {

std::string toHex(ByteView data)
{
    std::string out;
    out.reserve(data.size() * 2);
    boost::algorithm::hex_lower(data.begin(), data.end(), std::back_inserter(out));
    return out;
}

Bytes fromHex(std::string_view hex)
{
    Bytes out;
    out.reserve(hex.size() / 2);
    try
    {
        boost::algorithm::unhex(hex.begin(), hex.end(), std::back_inserter(out));
    }
    catch (const boost::algorithm::hex_decode_error&)
    {
        throw Error(ErrorCode::BadHex, "invalid hex string '" + std::string(hex) + "'");
    }
    return out;
}

template <std::size_t N>
ByteArray<N> arrayFromHex(std::string_view hex)
{
    auto raw = fromHex(hex);
    if (raw.size() != N)
        throw Error(ErrorCode::BadHex,
                    "expected " + std::to_string(N) + " bytes, got " + std::to_string(raw.size()));
    ByteArray<N> out{};
    std::copy(raw.begin(), raw.end(), out.begin());
    return out;
}

template ByteArray<6> arrayFromHex<6>(std::string_view);
template ByteArray<32> arrayFromHex<32>(std::string_view);
template ByteArray<64> arrayFromHex<64>(std::string_view);

bool containsSubsequence(ByteView haystack, ByteView needle)
{
    if (needle.empty())
        return true;
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
           haystack.end();
}

bool constantTimeEqual(ByteView a, ByteView b)
{
    if (a.size() != b.size())
        return false;
    return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

std::string_view errorCodeName(ErrorCode code)
{
    switch (code)
    {
    case ErrorCode::BadHex: return "BadHex";
    case ErrorCode::LowOrderResult: return "LowOrderResult";
    case ErrorCode::MalformedPoint: return "MalformedPoint";
    case ErrorCode::LengthExceeded: return "LengthExceeded";
    case ErrorCode::BadSize: return "BadSize";
    case ErrorCode::InsufficientEntropy: return "InsufficientEntropy";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::DecodeAmbiguous: return "DecodeAmbiguous";
    case ErrorCode::ReconstructFailed: return "ReconstructFailed";
    case ErrorCode::MalformedCertificate: return "MalformedCertificate";
    case ErrorCode::MalformedMessage: return "MalformedMessage";
    case ErrorCode::EnrollmentFailed: return "EnrollmentFailed";
    case ErrorCode::VariantMismatch: return "VariantMismatch";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::CertInvalid: return "CertInvalid";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Revoked: return "Revoked";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

} // namespace pufkex
