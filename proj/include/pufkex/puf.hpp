#pragma once

#include "pufkex/bitvector.hpp"
#include "pufkex/bytes.hpp"

#include <cstdint>

namespace pufkex::puf {

constexpr std::size_t kDefaultSizeBits = 12288;

using PufResponse = BitVector;

// i.i.d. symmetric bit flips applied to each readout.
struct NoiseModel
{
    double flipProbability = 0.0; // in [0, 0.5)
    std::uint64_t noiseSeed = 0;
};

/// Simulated SRAM start-up pattern of one chip.
///
/// The reference pattern R is the first `size` bits of the DRBG stream seeded
/// by the device seed, so recreating a device from its seed yields the same R.
class PufDevice
{
  public:
    // Throws BadSize unless size is a multiple of 8 and at least 1024.
    static PufDevice create(std::uint64_t deviceSeed, std::size_t sizeBits = kDefaultSizeBits);

    std::uint64_t seed() const { return seed_; }
    std::size_t size() const { return reference_.size(); }
    const PufResponse& reference() const { return reference_; }

  private:
    PufDevice(std::uint64_t seed, PufResponse reference)
        : seed_(seed), reference_(std::move(reference))
    {
    }

    std::uint64_t seed_;
    PufResponse reference_;
};

// R' = R xor e, e ~ Bernoulli(p) per bit, drawn from noise.noiseSeed.
PufResponse readout(const PufDevice& dev, const NoiseModel& noise);

// Noise seed for the index-th readout in a sequence based on `base`.
std::uint64_t deriveNoiseSeed(std::uint64_t base, std::uint64_t index);

/// TRNG seed from readout noise: sha256((R'1 ^ R'2) || (R'3 ^ R'4) || ...).
///
/// Readout i uses deriveNoiseSeed(noise.noiseSeed, i). readoutCount must be
/// even and >= 2 (InvalidArgument). Throws InsufficientEntropy if every
/// XOR block is zero.
ByteArray<32> extractEntropySeed(const PufDevice& dev, const NoiseModel& noise,
                                 std::size_t readoutCount);

void validate(const NoiseModel& noise);

} // namespace pufkex::puf
