#include "pufkex/ed25519.hpp"
#include "pufkex/curve25519.hpp"
#include "pufkex/error.hpp"
#include "pufkex/symmetric.hpp"

#include <algorithm>
#include <optional>

namespace pufkex::curve {

namespace {

using Fe = FieldElement;
using u128 = unsigned __int128;

// Group order L = 2^252 + 27742317777372353535851937790883648493, little-endian limbs.
constexpr std::array<std::uint64_t, 4> kOrder = {0x5812631a5cf5d3ed, 0x14def9dea2f79cd6,
                                                 0x0000000000000000, 0x1000000000000000};

const Fe& curveD()
{
    static const Fe d = (-Fe::fromUint(121665)) * Fe::fromUint(121666).invert();
    return d;
}

const Fe& curveD2()
{
    static const Fe d2 = curveD() + curveD();
    return d2;
}

const Fe& sqrtMinusOne()
{
    // 2^((p-1)/4)
    static const Fe r = [] {
        ByteArray<32> e{};
        e.fill(0xff);
        e[0] = 0xfb;
        e[31] = 0x1f;
        return Fe::fromUint(2).pow(e);
    }();
    return r;
}

struct Point
{
    Fe x, y, z, t;

    static Point identity() { return {Fe::zero(), Fe::one(), Fe::one(), Fe::zero()}; }
};

Point add(const Point& p, const Point& q)
{
    const Fe a = (p.y - p.x) * (q.y - q.x);
    const Fe b = (p.y + p.x) * (q.y + q.x);
    const Fe c = p.t * curveD2() * q.t;
    const Fe d = (p.z + p.z) * q.z;
    const Fe e = b - a, f = d - c, g = d + c, h = b + a;
    return {e * f, g * h, f * g, e * h};
}

Point dbl(const Point& p)
{
    const Fe a = p.x.square();
    const Fe b = p.y.square();
    const Fe c = p.z.square() + p.z.square();
    const Fe h = a + b;
    const Fe e = h - (p.x + p.y).square();
    const Fe g = a - b;
    const Fe f = c + g;
    return {e * f, g * h, f * g, e * h};
}

Point scalarMul(const Point& p, ByteView scalarLe)
{
    Point r = Point::identity();
    for (std::size_t i = scalarLe.size() * 8; i-- > 0;)
    {
        r = dbl(r);
        if ((scalarLe[i / 8] >> (i % 8)) & 1)
            r = add(r, p);
    }
    return r;
}

ByteArray<32> encode(const Point& p)
{
    const Fe zi = p.z.invert();
    const Fe x = p.x * zi;
    ByteArray<32> out = (p.y * zi).toBytes();
    out[31] |= static_cast<std::uint8_t>(x.isNegative() << 7);
    return out;
}

std::optional<Point> decode(ByteView in)
{
    if (in.size() != 32)
        return std::nullopt;
    const bool sign = in[31] >> 7;
    const Fe y = Fe::fromBytes(in);

    // Reject non-canonical y.
    ByteArray<32> masked{};
    std::copy(in.begin(), in.end(), masked.begin());
    masked[31] &= 0x7f;
    if (y.toBytes() != masked)
        return std::nullopt;

    const Fe y2 = y.square();
    const Fe u = y2 - Fe::one();
    const Fe v = curveD() * y2 + Fe::one();
    const Fe v3 = v.square() * v;
    Fe x = u * v3 * (u * v3 * v3 * v).pow22523();

    const Fe vx2 = v * x.square();
    if (vx2 == u)
    {
    }
    else if (vx2 == -u)
        x = x * sqrtMinusOne();
    else
        return std::nullopt;

    if (x.isZero() && sign)
        return std::nullopt;
    if (x.isNegative() != sign)
        x = -x;
    return Point{x, y, Fe::one(), x * y};
}

const Point& basePoint()
{
    static const Point b = [] {
        ByteArray<32> enc{};
        enc.fill(0x66);
        enc[0] = 0x58;
        return *decode(enc);
    }();
    return b;
}

// --- scalars modulo L -------------------------------------------------------

using Limbs4 = std::array<std::uint64_t, 4>;

bool geqOrder(const Limbs4& r)
{
    for (int i = 3; i >= 0; --i)
    {
        if (r[i] != kOrder[i])
            return r[i] > kOrder[i];
    }
    return true;
}

void subOrder(Limbs4& r)
{
    std::uint64_t borrow = 0;
    for (int i = 0; i < 4; ++i)
    {
        const u128 diff = u128{r[i]} - kOrder[i] - borrow;
        r[i] = static_cast<std::uint64_t>(diff);
        borrow = static_cast<std::uint64_t>(diff >> 127);
    }
}

ByteArray<32> limbsToBytes(const Limbs4& r)
{
    ByteArray<32> out{};
    for (int i = 0; i < 32; ++i)
        out[i] = static_cast<std::uint8_t>(r[i / 8] >> (8 * (i % 8)));
    return out;
}

Limbs4 bytesToLimbs(ByteView in32)
{
    Limbs4 r{};
    for (int i = 0; i < 32; ++i)
        r[i / 8] |= std::uint64_t{in32[i]} << (8 * (i % 8));
    return r;
}

// Little-endian byte string of any length, reduced mod L by shift-and-subtract.
ByteArray<32> reduceModOrder(ByteView in)
{
    Limbs4 r{};
    for (std::size_t i = in.size() * 8; i-- > 0;)
    {
        const std::uint64_t bit = (in[i / 8] >> (i % 8)) & 1;
        for (int j = 3; j > 0; --j)
            r[j] = (r[j] << 1) | (r[j - 1] >> 63);
        r[0] = (r[0] << 1) | bit;
        if (geqOrder(r))
            subOrder(r);
    }
    return limbsToBytes(r);
}

// (a * b + c) mod L for 32-byte little-endian inputs.
ByteArray<32> mulAddModOrder(ByteView a, ByteView b, ByteView c)
{
    const Limbs4 x = bytesToLimbs(a), y = bytesToLimbs(b), z = bytesToLimbs(c);
    std::array<std::uint64_t, 9> prod{};
    for (int i = 0; i < 4; ++i)
    {
        u128 carry = 0;
        for (int j = 0; j < 4; ++j)
        {
            const u128 cur = u128{x[i]} * y[j] + prod[i + j] + carry;
            prod[i + j] = static_cast<std::uint64_t>(cur);
            carry = cur >> 64;
        }
        prod[i + 4] += static_cast<std::uint64_t>(carry);
    }
    u128 carry = 0;
    for (int i = 0; i < 9; ++i)
    {
        const u128 cur = u128{prod[i]} + (i < 4 ? z[i] : 0) + carry;
        prod[i] = static_cast<std::uint64_t>(cur);
        carry = cur >> 64;
    }
    Bytes wide(72);
    for (int i = 0; i < 72; ++i)
        wide[i] = static_cast<std::uint8_t>(prod[i / 8] >> (8 * (i % 8)));
    return reduceModOrder(wide);
}

ByteArray<32> negateModOrder(ByteView a)
{
    Limbs4 r = bytesToLimbs(reduceModOrder(a));
    Limbs4 out{};
    std::uint64_t borrow = 0;
    for (int i = 0; i < 4; ++i)
    {
        const u128 diff = u128{kOrder[i]} - r[i] - borrow;
        out[i] = static_cast<std::uint64_t>(diff);
        borrow = static_cast<std::uint64_t>(diff >> 127);
    }
    if (geqOrder(out))
        subOrder(out);
    return limbsToBytes(out);
}

bool scalarIsCanonical(ByteView s32)
{
    return !geqOrder(bytesToLimbs(s32));
}

Signature signWithScalar(ByteView scalar, ByteView publicKey, ByteView noncePrefix,
                         ByteView nonceExtra, ByteView msg)
{
    const ByteArray<32> r = reduceModOrder(sym::sha512(noncePrefix, msg, nonceExtra));
    const ByteArray<32> rEnc = encode(scalarMul(basePoint(), r));
    const ByteArray<32> k = reduceModOrder(sym::sha512(rEnc, publicKey, msg));
    const ByteArray<32> s = mulAddModOrder(k, scalar, r);

    Signature sig;
    std::copy(rEnc.begin(), rEnc.end(), sig.bytes.begin());
    std::copy(s.begin(), s.end(), sig.bytes.begin() + 32);
    return sig;
}

} // namespace

SigningKeyPair SigningKeyPair::fromSeed(ByteView seed)
{
    if (seed.size() != 32)
        throw Error(ErrorCode::InvalidArgument, "Ed25519 seed must be 32 bytes");
    const auto h = sym::sha512(seed);
    const Scalar a = clampScalar(ByteView(h).first(32));
    SigningKeyPair kp;
    std::copy(seed.begin(), seed.end(), kp.seed.begin());
    kp.publicKey = encode(scalarMul(basePoint(), a));
    return kp;
}

Signature edSign(const SigningKeyPair& kp, ByteView msg)
{
    const auto h = sym::sha512(kp.seed);
    const Scalar a = clampScalar(ByteView(h).first(32));
    return signWithScalar(a, kp.publicKey, ByteView(h).subspan(32), {}, msg);
}

VerifyStatus edVerifyDetailed(ByteView publicKey, ByteView msg, const Signature& sig)
{
    const ByteView rEnc = ByteView(sig.bytes).first(32);
    const ByteView s = ByteView(sig.bytes).subspan(32);

    const auto a = decode(publicKey);
    const auto r = decode(rEnc);
    if (!a || !r)
        return VerifyStatus::MalformedPoint;
    if (!scalarIsCanonical(s))
        return VerifyStatus::Reject;

    const ByteArray<32> k = reduceModOrder(sym::sha512(rEnc, publicKey, msg));
    const Point lhs = scalarMul(basePoint(), s);
    const Point rhs = add(*r, scalarMul(*a, k));
    return encode(lhs) == encode(rhs) ? VerifyStatus::Accept : VerifyStatus::Reject;
}

ByteArray<32> edwardsBaseMul(ByteView scalar32)
{
    return encode(scalarMul(basePoint(), scalar32));
}

ByteArray<32> montgomeryToEdwards(ByteView u32)
{
    const Fe u = Fe::fromBytes(u32);
    const Fe y = (u - Fe::one()) * (u + Fe::one()).invert();
    auto out = y.toBytes();
    out[31] &= 0x7f;
    return out;
}

Signature xedSign(ByteView agreementSecret32, ByteView msg, ByteView random64)
{
    if (random64.size() != 64)
        throw Error(ErrorCode::InvalidArgument, "xedSign needs 64 random bytes");
    const Scalar k = clampScalar(agreementSecret32);
    ByteArray<32> edPub = edwardsBaseMul(k);
    ByteArray<32> a = reduceModOrder(k);
    if (edPub[31] & 0x80)
    {
        a = negateModOrder(a);
        edPub[31] &= 0x7f;
    }

    Bytes prefix(32, 0xff);
    prefix[0] = 0xfe;
    append(prefix, a);
    return signWithScalar(a, edPub, prefix, random64, msg);
}

bool xedVerify(ByteView u32, ByteView msg, const Signature& sig)
{
    if (u32.size() != 32)
        return false;
    const Fe u = Fe::fromBytes(u32);
    // u = -1 has no Edwards image.
    if ((u + Fe::one()).isZero())
        return false;
    return edVerify(montgomeryToEdwards(u32), msg, sig);
}

} // namespace pufkex::curve
