#pragma once

#include "pufkex/bytes.hpp"
#include "pufkex/curve25519.hpp"
#include "pufkex/ed25519.hpp"
#include "pufkex/fuzzy_extractor.hpp"

#include <cstdint>
#include <string>
#include <variant>

namespace pufkex::id {

// 48-bit identifier, the size of a MAC address.
struct DeviceId
{
    ByteArray<6> bytes{};

    static DeviceId fromHex(std::string_view hex);
    // Deterministic identifier for a simulated device seed.
    static DeviceId fromSeed(std::uint64_t seed);
    std::string hex() const { return toHex(bytes); }

    auto operator<=>(const DeviceId&) const = default;
};

enum class CertKind : std::uint8_t {
    Device = 0x01,
    Server = 0x02,
};

// TLV tags of the certificate encoding, in canonical order.
namespace tag {
constexpr std::uint8_t Id = 0x01;
constexpr std::uint8_t HelperData = 0x02;
constexpr std::uint8_t PublicKey = 0x03;
constexpr std::uint8_t Signature = 0x04;
constexpr std::uint8_t Kind = 0x05;
} // namespace tag

struct DeviceCertificate
{
    DeviceId id;
    fe::HelperData hd;
    curve::PublicKey pk{};
    curve::Signature sig;

    bool operator==(const DeviceCertificate&) const = default;
};

struct ServerCertificate
{
    DeviceId id;
    curve::PublicKey pk{};
    curve::Signature sig;

    bool operator==(const ServerCertificate&) const = default;
};

using Certificate = std::variant<DeviceCertificate, ServerCertificate>;

// kind || ID || HD || PK
Bytes certPreimage(const DeviceId& id, const fe::HelperData& hd, const curve::PublicKey& pk);
// kind || ID || PK
Bytes certPreimage(const DeviceId& id, const curve::PublicKey& pk);

DeviceCertificate issueDeviceCert(const curve::SigningKeyPair& ttp, const DeviceId& id,
                                  const fe::HelperData& hd, const curve::PublicKey& pk);
ServerCertificate issueServerCert(const curve::SigningKeyPair& ttp, const DeviceId& id,
                                  const curve::PublicKey& pk);

bool verifyCert(const DeviceCertificate& cert, ByteView pkTtp);
bool verifyCert(const ServerCertificate& cert, ByteView pkTtp);
// Throws MalformedCertificate if the bytes do not decode.
bool verifyCert(ByteView encoded, ByteView pkTtp);

Bytes encodeTlv(const DeviceCertificate& cert);
Bytes encodeTlv(const ServerCertificate& cert);

// All decoders throw MalformedCertificate on structural errors (wrong kind,
// unknown or missing tags, bad field lengths, non-canonical order).
Certificate decodeTlv(ByteView bytes);
DeviceCertificate decodeDeviceCert(ByteView bytes);
ServerCertificate decodeServerCert(ByteView bytes);

} // namespace pufkex::id
