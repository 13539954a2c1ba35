#pragma once

#include "pufkex/bytes.hpp"

namespace pufkex::curve {

struct Signature
{
    ByteArray<64> bytes{};

    bool operator==(const Signature&) const = default;
};

struct SigningKeyPair
{
    ByteArray<32> seed{};
    ByteArray<32> publicKey{};

    // RFC 8032 key derivation from a 32-byte secret seed.
    static SigningKeyPair fromSeed(ByteView seed32);
};

enum class VerifyStatus {
    Accept,
    Reject,
    MalformedPoint, // public key or R does not decode to a curve point
};

// Deterministic Ed25519 (RFC 8032, pure variant).
Signature edSign(const SigningKeyPair& kp, ByteView msg);

VerifyStatus edVerifyDetailed(ByteView publicKey32, ByteView msg, const Signature& sig);

inline bool edVerify(ByteView publicKey32, ByteView msg, const Signature& sig)
{
    return edVerifyDetailed(publicKey32, msg, sig) == VerifyStatus::Accept;
}

// Signatures made with an X25519 secret, verifiable against its Montgomery
// u-coordinate. The Edwards key is forced to a zero sign bit so the public
// side needs nothing beyond u. random64 feeds the nonce hash.
Signature xedSign(ByteView agreementSecret32, ByteView msg, ByteView random64);
bool xedVerify(ByteView montgomeryU32, ByteView msg, const Signature& sig);

// Edwards encoding (sign bit 0) of the point whose Montgomery u is given.
ByteArray<32> montgomeryToEdwards(ByteView montgomeryU32);

// Encoded Edwards point scalar32 * B, with the scalar used as-is (no clamping).
ByteArray<32> edwardsBaseMul(ByteView scalar32);

} // namespace pufkex::curve
