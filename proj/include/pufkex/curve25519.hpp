#pragma once

#include "pufkex/bytes.hpp"

#include <array>
#include <cstdint>

namespace pufkex::curve {

/// Residue modulo p = 2^255 - 19 held as five 51-bit limbs.
///
/// Limbs are kept weakly reduced (each below 2^52) after every operation;
/// toBytes() produces the unique canonical encoding with value < p.
class FieldElement
{
  public:
    FieldElement() = default;

    static FieldElement zero() { return FieldElement{}; }
    static FieldElement one();
    static FieldElement fromUint(std::uint64_t v);

    // Bit 255 is ignored; non-canonical values (p..2^255-1) are accepted and
    // reduced by the arithmetic.
    static FieldElement fromBytes(ByteView in32);
    ByteArray<32> toBytes() const;

    FieldElement operator+(const FieldElement& o) const;
    FieldElement operator-(const FieldElement& o) const;
    FieldElement operator*(const FieldElement& o) const;
    FieldElement operator-() const { return zero() - *this; }

    FieldElement square() const { return *this * *this; }
    FieldElement mulSmall(std::uint32_t k) const;
    FieldElement invert() const;
    // this^((p-5)/8), used for square roots.
    FieldElement pow22523() const;
    FieldElement pow(ByteView exponentLe) const;

    bool isZero() const;
    // Low bit of the canonical encoding.
    bool isNegative() const;
    bool operator==(const FieldElement& o) const { return toBytes() == o.toBytes(); }

    // Swaps a and b iff flag is 1, without branching on flag.
    static void conditionalSwap(FieldElement& a, FieldElement& b, std::uint64_t flag);

  private:
    std::array<std::uint64_t, 5> limb_{};
};

using Scalar = ByteArray<32>;
using PublicKey = ByteArray<32>;
using SharedSecret = ByteArray<32>;

// RFC 7748 clamping: clear bits 0..2 and 255, set bit 254.
Scalar clampScalar(ByteView raw32);

/// X25519 Montgomery-ladder scalar multiplication (RFC 7748).
///
/// The scalar is clamped and the top bit of u masked internally. Throws
/// Error(LowOrderResult) when the output is all zero.
SharedSecret x25519(ByteView scalar32, ByteView u32);

// x25519(scalar, 9)
PublicKey x25519Base(ByteView scalar32);

struct AgreementKeyPair
{
    Scalar secret{}; // clamped
    PublicKey publicKey{};

    static AgreementKeyPair fromSecret(ByteView raw32);
};

} // namespace pufkex::curve
