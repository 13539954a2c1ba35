#pragma once

#include "pufkex/bytes.hpp"

#include <cstddef>

namespace pufkex {

// Fixed-length bit string; bit i lives in byte i/8 at position i%8 (LSB first).
class BitVector
{
  public:
    BitVector() = default;
    explicit BitVector(std::size_t bits) : bits_(bits), data_((bits + 7) / 8, 0) {}

    // Takes all 8*bytes.size() bits.
    static BitVector fromBytes(ByteView bytes);
    // Takes the first `bits` bits; the rest of the final byte must be zero.
    static BitVector fromBytes(ByteView bytes, std::size_t bits);

    std::size_t size() const { return bits_; }
    const Bytes& bytes() const { return data_; }

    bool get(std::size_t i) const { return (data_[i / 8] >> (i % 8)) & 1; }
    void set(std::size_t i, bool v)
    {
        const auto mask = static_cast<std::uint8_t>(1u << (i % 8));
        data_[i / 8] = v ? (data_[i / 8] | mask) : (data_[i / 8] & ~mask);
    }
    void flip(std::size_t i) { data_[i / 8] ^= static_cast<std::uint8_t>(1u << (i % 8)); }

    // Sizes must match; throws SizeMismatch otherwise.
    BitVector operator^(const BitVector& o) const;
    std::size_t popcount() const;
    bool none() const { return popcount() == 0; }

    bool operator==(const BitVector&) const = default;

  private:
    std::size_t bits_ = 0;
    Bytes data_;
};

std::size_t hammingDistance(const BitVector& a, const BitVector& b);
double fractionalHammingDistance(const BitVector& a, const BitVector& b);

} // namespace pufkex
