#include "pufkex/bitvector.hpp"
#include "pufkex/error.hpp"

#include <bit>

namespace pufkex {

BitVector BitVector::fromBytes(ByteView bytes)
{
    return fromBytes(bytes, bytes.size() * 8);
}

BitVector BitVector::fromBytes(ByteView bytes, std::size_t bits)
{
    if ((bits + 7) / 8 != bytes.size())
        throw Error(ErrorCode::SizeMismatch, "byte length does not match bit length");
    BitVector v(bits);
    std::copy(bytes.begin(), bytes.end(), v.data_.begin());
    if (bits % 8 != 0 && (v.data_.back() >> (bits % 8)) != 0)
        throw Error(ErrorCode::SizeMismatch, "padding bits must be zero");
    return v;
}

BitVector BitVector::operator^(const BitVector& o) const
{
    if (bits_ != o.bits_)
        throw Error(ErrorCode::SizeMismatch, "bit vectors of " + std::to_string(bits_) +
                                                 " and " + std::to_string(o.bits_) + " bits");
    BitVector r(bits_);
    for (std::size_t i = 0; i < data_.size(); ++i)
        r.data_[i] = data_[i] ^ o.data_[i];
    return r;
}

std::size_t BitVector::popcount() const
{
    std::size_t n = 0;
    for (auto b : data_)
        n += static_cast<std::size_t>(std::popcount(b));
    return n;
}

std::size_t hammingDistance(const BitVector& a, const BitVector& b)
{
    return (a ^ b).popcount();
}

double fractionalHammingDistance(const BitVector& a, const BitVector& b)
{
    return static_cast<double>(hammingDistance(a, b)) / static_cast<double>(a.size());
}

} // namespace pufkex
