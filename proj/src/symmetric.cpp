#include "pufkex/symmetric.hpp"
#include "pufkex/error.hpp"

#include <memory>

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/kdf.h>
#include <openssl/sha.h>

namespace pufkex::sym {

namespace {

const std::string_view kDrbgLabel = "pufkex-drbg";
const std::string_view kDrbgSeedLabel = "pufkex-drbg-seed";

struct CtxDeleter
{
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
    void operator()(EVP_PKEY_CTX* c) const { EVP_PKEY_CTX_free(c); }
};

void check(int rc, const char* what)
{
    if (rc != 1)
        throw Error(ErrorCode::InvalidState, std::string("OpenSSL failure in ") + what);
}

} // namespace

Digest sha256(ByteView msg)
{
    Digest out{};
    SHA256(msg.data(), msg.size(), out.data());
    return out;
}

ByteArray<64> sha512(ByteView msg)
{
    ByteArray<64> out{};
    SHA512(msg.data(), msg.size(), out.data());
    return out;
}

ByteArray<64> sha512(ByteView a, ByteView b, ByteView c, ByteView d)
{
    std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx(EVP_MD_CTX_new());
    check(EVP_DigestInit_ex(ctx.get(), EVP_sha512(), nullptr), "sha512 init");
    for (ByteView part : {a, b, c, d})
        check(EVP_DigestUpdate(ctx.get(), part.data(), part.size()), "sha512 update");
    ByteArray<64> out{};
    unsigned int len = 0;
    check(EVP_DigestFinal_ex(ctx.get(), out.data(), &len), "sha512 final");
    return out;
}

Tag hmacSha256(ByteView key, ByteView msg)
{
    Tag out{};
    unsigned int len = 0;
    // OpenSSL rejects a null key pointer even for zero length.
    static const std::uint8_t empty = 0;
    const std::uint8_t* k = key.empty() ? &empty : key.data();
    if (HMAC(EVP_sha256(), k, static_cast<int>(key.size()), msg.data(), msg.size(), out.data(),
             &len) == nullptr)
        throw Error(ErrorCode::InvalidState, "HMAC failed");
    return out;
}

Bytes hkdf(ByteView salt, ByteView ikm, ByteView info, std::size_t length)
{
    if (length > kHkdfMaxLength)
        throw Error(ErrorCode::LengthExceeded,
                    "HKDF output of " + std::to_string(length) + " bytes exceeds 8160");
    if (length == 0)
        return {};

    std::unique_ptr<EVP_PKEY_CTX, CtxDeleter> ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr));
    check(EVP_PKEY_derive_init(ctx.get()), "hkdf init");
    check(EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha256()), "hkdf md");
    // An empty salt means HashLen zero bytes, which is what OpenSSL uses when unset.
    if (!salt.empty())
        check(EVP_PKEY_CTX_set1_hkdf_salt(ctx.get(), salt.data(), static_cast<int>(salt.size())),
              "hkdf salt");
    static const std::uint8_t empty = 0;
    check(EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), ikm.empty() ? &empty : ikm.data(),
                                     static_cast<int>(ikm.size())),
          "hkdf key");
    if (!info.empty())
        check(EVP_PKEY_CTX_add1_hkdf_info(ctx.get(), info.data(), static_cast<int>(info.size())),
              "hkdf info");
    Bytes out(length);
    std::size_t outLen = length;
    check(EVP_PKEY_derive(ctx.get(), out.data(), &outLen), "hkdf derive");
    return out;
}

DrbgState DrbgState::fromSeed(ByteView seed)
{
    Bytes material;
    append(material, view(kDrbgSeedLabel));
    append(material, seed);
    DrbgState s;
    s.key = sha256(material);
    return s;
}

DrbgState DrbgState::fromSeed(std::uint64_t seed)
{
    Bytes raw;
    appendBe64(raw, seed);
    return fromSeed(raw);
}

DrbgOutput drbgBytes(DrbgState state, std::size_t n)
{
    DrbgOutput out;
    out.bytes.reserve(n);

    const std::size_t fromPending = std::min(n, state.pending.size());
    out.bytes.insert(out.bytes.end(), state.pending.begin(),
                     state.pending.begin() + static_cast<std::ptrdiff_t>(fromPending));
    state.pending.erase(state.pending.begin(),
                        state.pending.begin() + static_cast<std::ptrdiff_t>(fromPending));

    Bytes input;
    while (out.bytes.size() < n)
    {
        input.clear();
        append(input, view(kDrbgLabel));
        appendBe64(input, state.counter++);
        const Tag block = hmacSha256(state.key, input);
        const std::size_t take = std::min(block.size(), n - out.bytes.size());
        out.bytes.insert(out.bytes.end(), block.begin(), block.begin() + static_cast<long>(take));
        state.pending.assign(block.begin() + static_cast<long>(take), block.end());
    }
    out.state = std::move(state);
    return out;
}

Bytes drawBytes(DrbgState& state, std::size_t n)
{
    auto out = drbgBytes(std::move(state), n);
    state = std::move(out.state);
    return std::move(out.bytes);
}

} // namespace pufkex::sym
