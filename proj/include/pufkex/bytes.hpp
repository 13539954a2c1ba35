#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pufkex {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

template <std::size_t N>
using ByteArray = std::array<std::uint8_t, N>;

std::string toHex(ByteView data);

// Accepts upper or lower case, no separators. Throws Error(BadHex).
Bytes fromHex(std::string_view hex);

template <std::size_t N>
ByteArray<N> arrayFromHex(std::string_view hex);

inline ByteView view(std::string_view s)
{
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline void append(Bytes& out, ByteView data)
{
    out.insert(out.end(), data.begin(), data.end());
}

inline void appendBe32(Bytes& out, std::uint32_t v)
{
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void appendBe64(Bytes& out, std::uint64_t v)
{
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline std::uint32_t loadBe32(const std::uint8_t* p)
{
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
           (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

// True iff needle occurs as a contiguous run inside haystack.
bool containsSubsequence(ByteView haystack, ByteView needle);

// Constant-time equality for equal-length inputs; false on length mismatch.
bool constantTimeEqual(ByteView a, ByteView b);

} // namespace pufkex
