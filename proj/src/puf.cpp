#include "pufkex/puf.hpp"
#include "pufkex/error.hpp"
#include "pufkex/symmetric.hpp"

#include <cmath>
#include <random>

namespace pufkex::puf {

void validate(const NoiseModel& noise)
{
    if (!(noise.flipProbability >= 0.0 && noise.flipProbability < 0.5))
        throw Error(ErrorCode::InvalidArgument, "flip probability must be in [0, 0.5)");
}

PufDevice PufDevice::create(std::uint64_t deviceSeed, std::size_t sizeBits)
{
    if (sizeBits % 8 != 0 || sizeBits < 1024)
        throw Error(ErrorCode::BadSize, "PUF size " + std::to_string(sizeBits) +
                                            " must be a multiple of 8 and at least 1024");
    auto stream = sym::drbgBytes(sym::DrbgState::fromSeed(deviceSeed), sizeBits / 8);
    return PufDevice(deviceSeed, BitVector::fromBytes(stream.bytes));
}

PufResponse readout(const PufDevice& dev, const NoiseModel& noise)
{
    validate(noise);
    PufResponse out = dev.reference();
    if (noise.flipProbability == 0.0)
        return out;

    // Flip when a uniform 64-bit draw falls below p * 2^64.
    const auto threshold = static_cast<std::uint64_t>(std::ldexp(noise.flipProbability, 64));
    std::mt19937_64 rng(noise.noiseSeed);
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        if (rng() < threshold)
            out.flip(i);
    }
    return out;
}

std::uint64_t deriveNoiseSeed(std::uint64_t base, std::uint64_t index)
{
    // splitmix64 finalizer over base + golden-ratio stride
    std::uint64_t z = base + (index + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

ByteArray<32> extractEntropySeed(const PufDevice& dev, const NoiseModel& noise,
                                 std::size_t readoutCount)
{
    if (readoutCount < 2 || readoutCount % 2 != 0)
        throw Error(ErrorCode::InvalidArgument, "readout count must be even and at least 2");

    Bytes pool;
    bool anyNoise = false;
    for (std::size_t i = 0; i < readoutCount; i += 2)
    {
        const auto first = readout(dev, {noise.flipProbability, deriveNoiseSeed(noise.noiseSeed, i)});
        const auto second =
            readout(dev, {noise.flipProbability, deriveNoiseSeed(noise.noiseSeed, i + 1)});
        const BitVector block = first ^ second;
        anyNoise = anyNoise || !block.none();
        append(pool, block.bytes());
    }
    if (!anyNoise)
        throw Error(ErrorCode::InsufficientEntropy,
                    "readouts carried no noise; supply external randomness");
    return sym::sha256(pool);
}

} // namespace pufkex::puf
