#include "pufkex/identity.hpp"
#include "pufkex/error.hpp"
#include "pufkex/symmetric.hpp"
#include "pufkex/wire.hpp"

#include <algorithm>

namespace pufkex::id {

namespace {

template <std::size_t N>
ByteArray<N> fixedField(const wire::TlvRecord& r, const char* name)
{
    if (r.value.size() != N)
        throw Error(ErrorCode::MalformedCertificate,
                    std::string(name) + " must be " + std::to_string(N) + " bytes");
    ByteArray<N> out{};
    std::copy(r.value.begin(), r.value.end(), out.begin());
    return out;
}

} // namespace

DeviceId DeviceId::fromHex(std::string_view hex)
{
    return DeviceId{arrayFromHex<6>(hex)};
}

DeviceId DeviceId::fromSeed(std::uint64_t seed)
{
    Bytes material;
    append(material, view("pufkex-device-id"));
    appendBe64(material, seed);
    const auto digest = sym::sha256(material);
    DeviceId id;
    std::copy_n(digest.begin(), id.bytes.size(), id.bytes.begin());
    return id;
}

Bytes certPreimage(const DeviceId& id, const fe::HelperData& hd, const curve::PublicKey& pk)
{
    Bytes out;
    out.reserve(1 + id.bytes.size() + hd.bits.bytes().size() + pk.size());
    out.push_back(static_cast<std::uint8_t>(CertKind::Device));
    append(out, id.bytes);
    append(out, hd.bits.bytes());
    append(out, pk);
    return out;
}

Bytes certPreimage(const DeviceId& id, const curve::PublicKey& pk)
{
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(CertKind::Server));
    append(out, id.bytes);
    append(out, pk);
    return out;
}

DeviceCertificate issueDeviceCert(const curve::SigningKeyPair& ttp, const DeviceId& id,
                                  const fe::HelperData& hd, const curve::PublicKey& pk)
{
    return {id, hd, pk, curve::edSign(ttp, certPreimage(id, hd, pk))};
}

ServerCertificate issueServerCert(const curve::SigningKeyPair& ttp, const DeviceId& id,
                                  const curve::PublicKey& pk)
{
    return {id, pk, curve::edSign(ttp, certPreimage(id, pk))};
}

bool verifyCert(const DeviceCertificate& cert, ByteView pkTtp)
{
    return curve::edVerify(pkTtp, certPreimage(cert.id, cert.hd, cert.pk), cert.sig);
}

bool verifyCert(const ServerCertificate& cert, ByteView pkTtp)
{
    return curve::edVerify(pkTtp, certPreimage(cert.id, cert.pk), cert.sig);
}

bool verifyCert(ByteView encoded, ByteView pkTtp)
{
    return std::visit([&](const auto& cert) { return verifyCert(cert, pkTtp); },
                      decodeTlv(encoded));
}

Bytes encodeTlv(const DeviceCertificate& cert)
{
    return wire::encodeTlv({
        {tag::Id, Bytes(cert.id.bytes.begin(), cert.id.bytes.end())},
        {tag::HelperData, cert.hd.bits.bytes()},
        {tag::PublicKey, Bytes(cert.pk.begin(), cert.pk.end())},
        {tag::Signature, Bytes(cert.sig.bytes.begin(), cert.sig.bytes.end())},
        {tag::Kind, {static_cast<std::uint8_t>(CertKind::Device)}},
    });
}

Bytes encodeTlv(const ServerCertificate& cert)
{
    return wire::encodeTlv({
        {tag::Id, Bytes(cert.id.bytes.begin(), cert.id.bytes.end())},
        {tag::PublicKey, Bytes(cert.pk.begin(), cert.pk.end())},
        {tag::Signature, Bytes(cert.sig.bytes.begin(), cert.sig.bytes.end())},
        {tag::Kind, {static_cast<std::uint8_t>(CertKind::Server)}},
    });
}

Certificate decodeTlv(ByteView bytes)
{
    const auto records = wire::decodeTlv(bytes, ErrorCode::MalformedCertificate);

    const wire::TlvRecord* fields[6] = {};
    for (const auto& r : records)
    {
        if (r.tag < tag::Id || r.tag > tag::Kind)
            throw Error(ErrorCode::MalformedCertificate, "unknown tag " + std::to_string(r.tag));
        fields[r.tag] = &r;
    }
    for (auto t : {tag::Id, tag::PublicKey, tag::Signature, tag::Kind})
    {
        if (fields[t] == nullptr)
            throw Error(ErrorCode::MalformedCertificate, "missing tag " + std::to_string(t));
    }

    const auto kind = fixedField<1>(*fields[tag::Kind], "kind")[0];
    const DeviceId id{fixedField<6>(*fields[tag::Id], "ID")};
    const auto pk = fixedField<32>(*fields[tag::PublicKey], "public key");
    const curve::Signature sig{fixedField<64>(*fields[tag::Signature], "signature")};

    if (kind == static_cast<std::uint8_t>(CertKind::Device))
    {
        if (fields[tag::HelperData] == nullptr || fields[tag::HelperData]->value.empty())
            throw Error(ErrorCode::MalformedCertificate, "device certificate lacks helper data");
        return DeviceCertificate{id, {BitVector::fromBytes(fields[tag::HelperData]->value)}, pk,
                                 sig};
    }
    if (kind == static_cast<std::uint8_t>(CertKind::Server))
    {
        if (fields[tag::HelperData] != nullptr)
            throw Error(ErrorCode::MalformedCertificate, "server certificate carries helper data");
        return ServerCertificate{id, pk, sig};
    }
    throw Error(ErrorCode::MalformedCertificate, "unknown certificate kind");
}

DeviceCertificate decodeDeviceCert(ByteView bytes)
{
    auto cert = decodeTlv(bytes);
    if (auto* dev = std::get_if<DeviceCertificate>(&cert))
        return std::move(*dev);
    throw Error(ErrorCode::MalformedCertificate, "expected a device certificate");
}

ServerCertificate decodeServerCert(ByteView bytes)
{
    auto cert = decodeTlv(bytes);
    if (auto* srv = std::get_if<ServerCertificate>(&cert))
        return *srv;
    throw Error(ErrorCode::MalformedCertificate, "expected a server certificate");
}

} // namespace pufkex::id
