#pragma once

#include "pufkex/bytes.hpp"

#include <cstdint>

namespace pufkex::sym {

using Digest = ByteArray<32>;
using Tag = ByteArray<32>;

Digest sha256(ByteView msg);
ByteArray<64> sha512(ByteView msg);
ByteArray<64> sha512(ByteView a, ByteView b, ByteView c = {}, ByteView d = {});

// HMAC-SHA-256 (RFC 2104).
Tag hmacSha256(ByteView key, ByteView msg);

constexpr std::size_t kHkdfMaxLength = 255 * 32;

// HKDF-SHA-256 extract-then-expand (RFC 5869). Throws LengthExceeded above 8160 bytes.
Bytes hkdf(ByteView salt, ByteView ikm, ByteView info, std::size_t length);

/// Counter-mode byte stream: block i = HMAC-SHA-256(key, "pufkex-drbg" || be64(i)).
///
/// The state is a value; drbgBytes returns the advanced copy. Unconsumed bytes
/// of the last block are carried so output is prefix-consistent under any
/// split of the requested lengths.
struct DrbgState
{
    ByteArray<32> key{};
    std::uint64_t counter = 0; // next block index
    Bytes pending;             // tail of block counter-1 not yet handed out

    // key = SHA-256("pufkex-drbg-seed" || seed)
    static DrbgState fromSeed(ByteView seed);
    static DrbgState fromSeed(std::uint64_t seed);
};

struct DrbgOutput
{
    Bytes bytes;
    DrbgState state;
};

DrbgOutput drbgBytes(DrbgState state, std::size_t n);

// Mutating convenience wrapper over drbgBytes.
Bytes drawBytes(DrbgState& state, std::size_t n);

template <std::size_t N>
ByteArray<N> drawArray(DrbgState& state)
{
    auto raw = drawBytes(state, N);
    ByteArray<N> out{};
    std::copy(raw.begin(), raw.end(), out.begin());
    return out;
}

} // namespace pufkex::sym
