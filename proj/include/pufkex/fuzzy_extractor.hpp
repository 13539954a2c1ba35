#pragma once

#include "pufkex/bitvector.hpp"
#include "pufkex/bytes.hpp"
#include "pufkex/puf.hpp"

#include <cstdint>

namespace pufkex::fe {

constexpr std::size_t kSecretBytes = 32;

struct SecretKey
{
    ByteArray<kSecretBytes> bytes{};

    bool operator==(const SecretKey&) const = default;
};

struct HelperData
{
    BitVector bits;

    bool operator==(const HelperData&) const = default;
};

/// Inner repetition code around an outer first-order Reed-Muller code RM(1, m).
///
/// The 256-bit secret is cut into `blocks()` chunks of m+1 bits; each chunk is
/// RM-encoded to 2^m bits and every codeword bit is repeated `repetition` times.
struct CodeParams
{
    unsigned rmOrder = 7;
    unsigned repetition = 3;

    unsigned messageBits() const { return rmOrder + 1; }
    std::size_t codewordBits() const { return std::size_t{1} << rmOrder; }
    std::size_t blocks() const { return kSecretBytes * 8 / messageBits(); }
    std::size_t blockBits() const { return codewordBits() * repetition; }
    std::size_t responseBits() const { return blocks() * blockBits(); }

    // Throws InvalidArgument for even repetition or m+1 not dividing 256.
    void validate() const;
};

// Bit 0 of msg is m0 (the complement bit); bit k pairs with bit k-1 of the
// codeword index: c_j = m0 ^ <(m1..mm), binary(j)>.
BitVector rmEncode(std::uint32_t msg, unsigned rmOrder = 7);

struct RmDecodeResult
{
    std::uint32_t message = 0;
    bool ambiguous = false; // top two correlation magnitudes tied; lowest index kept
    int correlation = 0;    // signed correlation of the chosen index
};

// Maximum-likelihood decode via the fast Hadamard transform.
RmDecodeResult rmDecodeDetailed(const BitVector& word, unsigned rmOrder = 7);

// As rmDecodeDetailed, but throws DecodeAmbiguous on a tie.
std::uint32_t rmDecode(const BitVector& word, unsigned rmOrder = 7);

// C = Encode(S): concatenated repetition-expanded RM codewords.
BitVector encodeSecret(const SecretKey& secret, const CodeParams& params = {});

// HD = R xor Encode(S). Throws SizeMismatch if |R| != params.responseBits().
HelperData enroll(const puf::PufResponse& reference, const SecretKey& secret,
                  const CodeParams& params = {});

struct ReconstructResult
{
    SecretKey secret;
    std::size_t ambiguousBlocks = 0;
};

// Never throws on decoding ties; reports them in ambiguousBlocks.
ReconstructResult reconstructDetailed(const puf::PufResponse& noisy, const HelperData& hd,
                                      const CodeParams& params = {});

// Throws ReconstructFailed if any block decodes ambiguously, SizeMismatch on length errors.
SecretKey reconstruct(const puf::PufResponse& noisy, const HelperData& hd,
                      const CodeParams& params = {});

} // namespace pufkex::fe
