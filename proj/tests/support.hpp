#pragma once

#include "pufkex/bytes.hpp"

#include <random>
#include <string>

namespace testsupport {

inline pufkex::Bytes hex(const std::string& s)
{
    return pufkex::fromHex(s);
}

inline pufkex::Bytes str(const std::string& s)
{
    return {s.begin(), s.end()};
}

template <std::size_t N>
pufkex::ByteArray<N> randomArray(std::mt19937_64& rng)
{
    pufkex::ByteArray<N> out{};
    for (auto& b : out)
        b = static_cast<std::uint8_t>(rng());
    return out;
}

inline pufkex::Bytes randomBytes(std::mt19937_64& rng, std::size_t n)
{
    pufkex::Bytes out(n);
    for (auto& b : out)
        b = static_cast<std::uint8_t>(rng());
    return out;
}

} // namespace testsupport
