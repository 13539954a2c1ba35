#include "pufkex/fuzzy_extractor.hpp"
#include "pufkex/error.hpp"

#include <bit>
#include <cstdlib>
#include <vector>

namespace pufkex::fe {

namespace {

bool secretBit(const SecretKey& s, std::size_t i)
{
    return (s.bytes[i / 8] >> (i % 8)) & 1;
}

void checkSizes(std::size_t got, const CodeParams& params, const char* what)
{
    if (got != params.responseBits())
        throw Error(ErrorCode::SizeMismatch, std::string(what) + " has " + std::to_string(got) +
                                                 " bits, code expects " +
                                                 std::to_string(params.responseBits()));
}

} // namespace

void CodeParams::validate() const
{
    if (repetition == 0 || repetition % 2 == 0)
        throw Error(ErrorCode::InvalidArgument, "repetition must be odd");
    if (rmOrder == 0 || rmOrder > 16 || (kSecretBytes * 8) % messageBits() != 0)
        throw Error(ErrorCode::InvalidArgument, "RM message length must divide 256");
}

BitVector rmEncode(std::uint32_t msg, unsigned rmOrder)
{
    const std::size_t n = std::size_t{1} << rmOrder;
    const bool m0 = msg & 1;
    const std::uint32_t linear = (msg >> 1) & ((1u << rmOrder) - 1);
    BitVector word(n);
    for (std::size_t j = 0; j < n; ++j)
    {
        const bool parity = std::popcount(linear & static_cast<std::uint32_t>(j)) & 1;
        word.set(j, m0 ^ parity);
    }
    return word;
}

RmDecodeResult rmDecodeDetailed(const BitVector& word, unsigned rmOrder)
{
    const std::size_t n = std::size_t{1} << rmOrder;
    if (word.size() != n)
        throw Error(ErrorCode::SizeMismatch, "RM word length does not match order");

    std::vector<int> f(n);
    for (std::size_t j = 0; j < n; ++j)
        f[j] = word.get(j) ? -1 : 1;
    for (std::size_t len = 1; len < n; len <<= 1)
    {
        for (std::size_t i = 0; i < n; i += 2 * len)
        {
            for (std::size_t k = i; k < i + len; ++k)
            {
                const int a = f[k], b = f[k + len];
                f[k] = a + b;
                f[k + len] = a - b;
            }
        }
    }

    std::size_t best = 0;
    bool tie = false;
    for (std::size_t j = 1; j < n; ++j)
    {
        const int mag = std::abs(f[j]), top = std::abs(f[best]);
        if (mag > top)
        {
            best = j;
            tie = false;
        }
        else if (mag == top)
            tie = true;
    }

    RmDecodeResult r;
    r.correlation = f[best];
    r.ambiguous = tie;
    r.message = (static_cast<std::uint32_t>(best) << 1) | (f[best] < 0 ? 1u : 0u);
    return r;
}

std::uint32_t rmDecode(const BitVector& word, unsigned rmOrder)
{
    const auto r = rmDecodeDetailed(word, rmOrder);
    if (r.ambiguous)
        throw Error(ErrorCode::DecodeAmbiguous, "top correlation magnitudes tie");
    return r.message;
}

BitVector encodeSecret(const SecretKey& secret, const CodeParams& params)
{
    params.validate();
    BitVector code(params.responseBits());
    const unsigned k = params.messageBits();
    for (std::size_t b = 0; b < params.blocks(); ++b)
    {
        std::uint32_t msg = 0;
        for (unsigned i = 0; i < k; ++i)
            msg |= static_cast<std::uint32_t>(secretBit(secret, b * k + i)) << i;
        const BitVector cw = rmEncode(msg, params.rmOrder);
        const std::size_t base = b * params.blockBits();
        for (std::size_t j = 0; j < cw.size(); ++j)
        {
            for (unsigned t = 0; t < params.repetition; ++t)
                code.set(base + j * params.repetition + t, cw.get(j));
        }
    }
    return code;
}

HelperData enroll(const puf::PufResponse& reference, const SecretKey& secret,
                  const CodeParams& params)
{
    params.validate();
    checkSizes(reference.size(), params, "PUF response");
    return HelperData{reference ^ encodeSecret(secret, params)};
}

ReconstructResult reconstructDetailed(const puf::PufResponse& noisy, const HelperData& hd,
                                      const CodeParams& params)
{
    params.validate();
    checkSizes(noisy.size(), params, "PUF response");
    checkSizes(hd.bits.size(), params, "helper data");

    const BitVector noisyCode = noisy ^ hd.bits;
    ReconstructResult out;
    const unsigned k = params.messageBits();
    BitVector collapsed(params.codewordBits());
    for (std::size_t b = 0; b < params.blocks(); ++b)
    {
        const std::size_t base = b * params.blockBits();
        for (std::size_t j = 0; j < params.codewordBits(); ++j)
        {
            unsigned ones = 0;
            for (unsigned t = 0; t < params.repetition; ++t)
                ones += noisyCode.get(base + j * params.repetition + t);
            collapsed.set(j, 2 * ones > params.repetition);
        }
        const auto dec = rmDecodeDetailed(collapsed, params.rmOrder);
        if (dec.ambiguous)
            ++out.ambiguousBlocks;
        for (unsigned i = 0; i < k; ++i)
        {
            const std::size_t bit = b * k + i;
            if ((dec.message >> i) & 1)
                out.secret.bytes[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
        }
    }
    return out;
}

SecretKey reconstruct(const puf::PufResponse& noisy, const HelperData& hd,
                      const CodeParams& params)
{
    auto r = reconstructDetailed(noisy, hd, params);
    if (r.ambiguousBlocks != 0)
        throw Error(ErrorCode::ReconstructFailed,
                    "DecodeAmbiguous in " + std::to_string(r.ambiguousBlocks) + " block(s)");
    return r.secret;
}

} // namespace pufkex::fe
