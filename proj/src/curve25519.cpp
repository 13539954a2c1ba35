#include "pufkex/curve25519.hpp"
#include "pufkex/error.hpp"

#include <algorithm>

namespace pufkex::curve {

namespace {

using u128 = unsigned __int128;
constexpr std::uint64_t kMask51 = (std::uint64_t{1} << 51) - 1;

// p - 2 and (p - 5) / 8, little-endian.
constexpr ByteArray<32> kPMinus2 = {0xeb, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
                                    0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
                                    0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
                                    0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0x7f};
constexpr ByteArray<32> kPMinus5Div8 = {0xfd, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
                                        0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
                                        0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
                                        0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0x0f};

void carry(std::array<std::uint64_t, 5>& h)
{
    for (int pass = 0; pass < 2; ++pass)
    {
        for (int i = 0; i < 4; ++i)
        {
            h[i + 1] += h[i] >> 51;
            h[i] &= kMask51;
        }
        h[0] += 19 * (h[4] >> 51);
        h[4] &= kMask51;
    }
}

} // namespace

FieldElement FieldElement::one()
{
    return fromUint(1);
}

FieldElement FieldElement::fromUint(std::uint64_t v)
{
    FieldElement r;
    r.limb_[0] = v & kMask51;
    r.limb_[1] = v >> 51;
    return r;
}

FieldElement FieldElement::fromBytes(ByteView in)
{
    if (in.size() != 32)
        throw Error(ErrorCode::InvalidArgument, "field element must be 32 bytes");
    auto load64 = [&](std::size_t off) {
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i)
            v = (v << 8) | in[off + i];
        return v;
    };
    FieldElement r;
    r.limb_[0] = load64(0) & kMask51;
    r.limb_[1] = (load64(6) >> 3) & kMask51;
    r.limb_[2] = (load64(12) >> 6) & kMask51;
    r.limb_[3] = (load64(19) >> 1) & kMask51;
    r.limb_[4] = (load64(24) >> 12) & kMask51;
    return r;
}

ByteArray<32> FieldElement::toBytes() const
{
    auto h = limb_;
    carry(h);

    // h < 2^255 + small; subtract p once if h >= p.
    std::uint64_t q = (h[0] + 19) >> 51;
    for (int i = 1; i < 5; ++i)
        q = (h[i] + q) >> 51;
    h[0] += 19 * q;
    for (int i = 0; i < 4; ++i)
    {
        h[i + 1] += h[i] >> 51;
        h[i] &= kMask51;
    }
    h[4] &= kMask51;

    ByteArray<32> out{};
    u128 acc = 0;
    int bits = 0;
    std::size_t pos = 0;
    for (int i = 0; i < 5; ++i)
    {
        acc |= u128{h[i]} << bits;
        bits += 51;
        while (bits >= 8 && pos < 32)
        {
            out[pos++] = static_cast<std::uint8_t>(acc);
            acc >>= 8;
            bits -= 8;
        }
    }
    if (pos < 32)
        out[pos] = static_cast<std::uint8_t>(acc);
    return out;
}

FieldElement FieldElement::operator+(const FieldElement& o) const
{
    FieldElement r;
    for (int i = 0; i < 5; ++i)
        r.limb_[i] = limb_[i] + o.limb_[i];
    carry(r.limb_);
    return r;
}

FieldElement FieldElement::operator-(const FieldElement& o) const
{
    // Add 4p before subtracting so limbs never underflow.
    constexpr std::uint64_t k4p0 = 0x1fffffffffffb4;
    constexpr std::uint64_t k4pi = 0x1ffffffffffffc;
    FieldElement r;
    r.limb_[0] = limb_[0] + k4p0 - o.limb_[0];
    for (int i = 1; i < 5; ++i)
        r.limb_[i] = limb_[i] + k4pi - o.limb_[i];
    carry(r.limb_);
    return r;
}

FieldElement FieldElement::operator*(const FieldElement& o) const
{
    const auto& a = limb_;
    const auto& b = o.limb_;
    const std::uint64_t b1_19 = 19 * b[1], b2_19 = 19 * b[2], b3_19 = 19 * b[3],
                        b4_19 = 19 * b[4];

    u128 r0 = u128{a[0]} * b[0] + u128{a[1]} * b4_19 + u128{a[2]} * b3_19 +
              u128{a[3]} * b2_19 + u128{a[4]} * b1_19;
    u128 r1 = u128{a[0]} * b[1] + u128{a[1]} * b[0] + u128{a[2]} * b4_19 +
              u128{a[3]} * b3_19 + u128{a[4]} * b2_19;
    u128 r2 = u128{a[0]} * b[2] + u128{a[1]} * b[1] + u128{a[2]} * b[0] +
              u128{a[3]} * b4_19 + u128{a[4]} * b3_19;
    u128 r3 = u128{a[0]} * b[3] + u128{a[1]} * b[2] + u128{a[2]} * b[1] +
              u128{a[3]} * b[0] + u128{a[4]} * b4_19;
    u128 r4 = u128{a[0]} * b[4] + u128{a[1]} * b[3] + u128{a[2]} * b[2] +
              u128{a[3]} * b[1] + u128{a[4]} * b[0];

    r1 += r0 >> 51;
    r2 += r1 >> 51;
    r3 += r2 >> 51;
    r4 += r3 >> 51;

    FieldElement r;
    r.limb_[0] = static_cast<std::uint64_t>(r0) & kMask51;
    r.limb_[1] = static_cast<std::uint64_t>(r1) & kMask51;
    r.limb_[2] = static_cast<std::uint64_t>(r2) & kMask51;
    r.limb_[3] = static_cast<std::uint64_t>(r3) & kMask51;
    r.limb_[4] = static_cast<std::uint64_t>(r4) & kMask51;
    u128 top = (r4 >> 51) * 19;
    top += r.limb_[0];
    r.limb_[0] = static_cast<std::uint64_t>(top) & kMask51;
    r.limb_[1] += static_cast<std::uint64_t>(top >> 51);
    return r;
}

FieldElement FieldElement::mulSmall(std::uint32_t k) const
{
    FieldElement r;
    u128 c = 0;
    for (int i = 0; i < 5; ++i)
    {
        c += u128{limb_[i]} * k;
        r.limb_[i] = static_cast<std::uint64_t>(c) & kMask51;
        c >>= 51;
    }
    r.limb_[0] += static_cast<std::uint64_t>(c) * 19;
    carry(r.limb_);
    return r;
}

FieldElement FieldElement::pow(ByteView exponentLe) const
{
    FieldElement result = one();
    for (std::size_t i = exponentLe.size() * 8; i-- > 0;)
    {
        result = result.square();
        if ((exponentLe[i / 8] >> (i % 8)) & 1)
            result = result * *this;
    }
    return result;
}

FieldElement FieldElement::invert() const
{
    return pow(kPMinus2);
}

FieldElement FieldElement::pow22523() const
{
    return pow(kPMinus5Div8);
}

bool FieldElement::isZero() const
{
    auto b = toBytes();
    return std::all_of(b.begin(), b.end(), [](std::uint8_t v) { return v == 0; });
}

bool FieldElement::isNegative() const
{
    return toBytes()[0] & 1;
}

void FieldElement::conditionalSwap(FieldElement& a, FieldElement& b, std::uint64_t flag)
{
    const std::uint64_t mask = 0 - flag;
    for (int i = 0; i < 5; ++i)
    {
        const std::uint64_t t = mask & (a.limb_[i] ^ b.limb_[i]);
        a.limb_[i] ^= t;
        b.limb_[i] ^= t;
    }
}

Scalar clampScalar(ByteView raw)
{
    if (raw.size() != 32)
        throw Error(ErrorCode::InvalidArgument, "scalar must be 32 bytes");
    Scalar k{};
    std::copy(raw.begin(), raw.end(), k.begin());
    k[0] &= 248;
    k[31] &= 127;
    k[31] |= 64;
    return k;
}

SharedSecret x25519(ByteView scalar, ByteView u)
{
    if (u.size() != 32)
        throw Error(ErrorCode::InvalidArgument, "u-coordinate must be 32 bytes");
    const Scalar k = clampScalar(scalar);

    const FieldElement x1 = FieldElement::fromBytes(u);
    FieldElement x2 = FieldElement::one();
    FieldElement z2 = FieldElement::zero();
    FieldElement x3 = x1;
    FieldElement z3 = FieldElement::one();
    std::uint64_t swap = 0;

    for (int t = 254; t >= 0; --t)
    {
        const std::uint64_t bit = (k[t / 8] >> (t % 8)) & 1;
        swap ^= bit;
        FieldElement::conditionalSwap(x2, x3, swap);
        FieldElement::conditionalSwap(z2, z3, swap);
        swap = bit;

        const FieldElement a = x2 + z2;
        const FieldElement aa = a.square();
        const FieldElement b = x2 - z2;
        const FieldElement bb = b.square();
        const FieldElement e = aa - bb;
        const FieldElement c = x3 + z3;
        const FieldElement d = x3 - z3;
        const FieldElement da = d * a;
        const FieldElement cb = c * b;
        x3 = (da + cb).square();
        z3 = x1 * (da - cb).square();
        x2 = aa * bb;
        z2 = e * (aa + e.mulSmall(121665));
    }
    FieldElement::conditionalSwap(x2, x3, swap);
    FieldElement::conditionalSwap(z2, z3, swap);

    SharedSecret out = (x2 * z2.invert()).toBytes();
    if (std::all_of(out.begin(), out.end(), [](std::uint8_t v) { return v == 0; }))
        throw Error(ErrorCode::LowOrderResult, "X25519 produced the all-zero output");
    return out;
}

PublicKey x25519Base(ByteView scalar)
{
    ByteArray<32> nine{};
    nine[0] = 9;
    return x25519(scalar, nine);
}

AgreementKeyPair AgreementKeyPair::fromSecret(ByteView raw)
{
    AgreementKeyPair kp;
    kp.secret = clampScalar(raw);
    kp.publicKey = x25519Base(kp.secret);
    return kp;
}

} // namespace pufkex::curve
