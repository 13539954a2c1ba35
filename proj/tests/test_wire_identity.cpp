#include "pufkex/error.hpp"
#include "pufkex/identity.hpp"
#include "pufkex/puf.hpp"
#include "pufkex/wire.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace pufkex;
using testsupport::hex;

namespace {

template <typename F>
ErrorCode codeOf(F&& f)
{
    try
    {
        f();
    }
    catch (const Error& e)
    {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::Io;
}

struct Fixture
{
    curve::SigningKeyPair ttp = curve::SigningKeyPair::fromSeed(Bytes(32, 0x42));
    id::DeviceId id = id::DeviceId::fromHex("0a1b2c3d4e5f");
    fe::HelperData hd{puf::PufDevice::create(3).reference()};
    curve::PublicKey pk = curve::x25519Base(Bytes(32, 0x07));
};

} // namespace

TEST_CASE("hex helpers")
{
    CHECK(toHex(hex("00ff10Ab")) == "00ff10ab");
    CHECK(hex("").empty());
    CHECK(codeOf([] { fromHex("abc"); }) == ErrorCode::BadHex);
    CHECK(codeOf([] { fromHex("zz"); }) == ErrorCode::BadHex);
    CHECK(codeOf([] { arrayFromHex<6>("00"); }) == ErrorCode::BadHex);
    CHECK(containsSubsequence(hex("0102030405"), hex("0304")));
    CHECK_FALSE(containsSubsequence(hex("0102030405"), hex("0305")));
    CHECK(constantTimeEqual(hex("0102"), hex("0102")));
    CHECK_FALSE(constantTimeEqual(hex("0102"), hex("0103")));
    CHECK_FALSE(constantTimeEqual(hex("0102"), hex("01")));
}

TEST_CASE("TLV round trip and layout")
{
    const wire::TlvRecords recs{{0x01, hex("aabb")}, {0x03, {}}, {0x7f, hex("00")}};
    const auto bytes = wire::encodeTlv(recs);
    CHECK(toHex(bytes) == "0100000002aabb" "0300000000" "7f0000000100");
    CHECK(wire::decodeTlv(bytes, ErrorCode::MalformedMessage) == recs);
    CHECK(wire::findTlv(recs, 0x03) != nullptr);
    CHECK(wire::findTlv(recs, 0x02) == nullptr);
}

TEST_CASE("TLV rejects non-canonical encodings")
{
    CHECK(codeOf([] { wire::encodeTlv({{2, {}}, {1, {}}}); }) == ErrorCode::InvalidArgument);
    CHECK(codeOf([] { wire::encodeTlv({{2, {}}, {2, {}}}); }) == ErrorCode::InvalidArgument);

    const auto e = ErrorCode::MalformedCertificate;
    CHECK(codeOf([&] { wire::decodeTlv(hex("0200000000" "0100000000"), e); }) == e);
    CHECK(codeOf([&] { wire::decodeTlv(hex("0100000000" "0100000000"), e); }) == e);
    CHECK(codeOf([&] { wire::decodeTlv(hex("01000000"), e); }) == e);
    CHECK(codeOf([&] { wire::decodeTlv(hex("0100000003aabb"), e); }) == e);
    CHECK(codeOf([&] { wire::decodeTlv(hex("0100000001aabb"), e); }) == e); // trailing byte
}

TEST_CASE("frames carry their total length")
{
    const auto f = wire::encodeFrame(0x20, hex("0102"));
    CHECK(toHex(f) == "00000007200102");
    const auto v = wire::decodeFrame(f);
    CHECK(v.kind == 0x20);
    CHECK(toHex(v.body) == "0102");

    CHECK(codeOf([] { wire::decodeFrame(hex("00000006200102")); }) == ErrorCode::MalformedMessage);
    CHECK(codeOf([] { wire::decodeFrame(hex("000000")); }) == ErrorCode::MalformedMessage);

    Bytes stream = f;
    append(stream, wire::encodeFrame(0x21, {}));
    CHECK(wire::completeFrameLength(stream) == 7u);
    CHECK(wire::completeFrameLength(ByteView(stream).first(6)) == std::nullopt);
    CHECK(wire::completeFrameLength(ByteView(stream).first(3)) == std::nullopt);
    CHECK(codeOf([] { wire::completeFrameLength(hex("00000002")); }) == ErrorCode::MalformedMessage);
}

TEST_CASE("device identifiers")
{
    const auto a = id::DeviceId::fromSeed(7);
    CHECK(a == id::DeviceId::fromSeed(7));
    CHECK(a != id::DeviceId::fromSeed(8));
    CHECK(id::DeviceId::fromHex(a.hex()) == a);
    CHECK(a.hex().size() == 12);
}

TEST_CASE("device certificates")
{
    Fixture f;
    const auto cert = id::issueDeviceCert(f.ttp, f.id, f.hd, f.pk);
    CHECK(id::verifyCert(cert, f.ttp.publicKey));

    const auto bytes = id::encodeTlv(cert);
    CHECK(bytes.size() == 5 * 5 + 6 + f.hd.bits.bytes().size() + 32 + 64 + 1);
    CHECK(id::decodeDeviceCert(bytes) == cert);
    CHECK(id::verifyCert(bytes, f.ttp.publicKey));

    const auto other = curve::SigningKeyPair::fromSeed(Bytes(32, 0x43));
    CHECK_FALSE(id::verifyCert(cert, other.publicKey));

    // Every field is covered by the signature.
    auto badId = cert;
    badId.id.bytes[0] ^= 1;
    CHECK_FALSE(id::verifyCert(badId, f.ttp.publicKey));
    auto badHd = cert;
    badHd.hd.bits.flip(1000);
    CHECK_FALSE(id::verifyCert(badHd, f.ttp.publicKey));
    auto badPk = cert;
    badPk.pk[5] ^= 0x20;
    CHECK_FALSE(id::verifyCert(badPk, f.ttp.publicKey));
}

TEST_CASE("server certificates")
{
    Fixture f;
    const auto cert = id::issueServerCert(f.ttp, f.id, f.pk);
    CHECK(id::verifyCert(cert, f.ttp.publicKey));
    const auto bytes = id::encodeTlv(cert);
    CHECK(id::decodeServerCert(bytes) == cert);
    CHECK(std::holds_alternative<id::ServerCertificate>(id::decodeTlv(bytes)));

    // A server signature can never pass as a device signature.
    const id::DeviceCertificate forged{f.id, {}, f.pk, cert.sig};
    CHECK_FALSE(id::verifyCert(forged, f.ttp.publicKey));
}

TEST_CASE("certificate decoding errors")
{
    Fixture f;
    const auto device = id::encodeTlv(id::issueDeviceCert(f.ttp, f.id, f.hd, f.pk));
    const auto server = id::encodeTlv(id::issueServerCert(f.ttp, f.id, f.pk));
    const auto bad = ErrorCode::MalformedCertificate;

    CHECK(codeOf([&] { id::decodeDeviceCert(server); }) == bad);
    CHECK(codeOf([&] { id::decodeServerCert(device); }) == bad);
    CHECK(codeOf([&] { id::decodeTlv(ByteView(device).first(device.size() - 1)); }) == bad);
    CHECK(codeOf([&] { id::verifyCert(hex("00"), f.ttp.publicKey); }) == bad);

    auto records = wire::decodeTlv(server, bad);
    records[0].value.pop_back(); // 5-byte ID
    CHECK(codeOf([&] { id::decodeTlv(wire::encodeTlv(records)); }) == bad);

    records = wire::decodeTlv(server, bad);
    records.back().value[0] = 9; // unknown kind
    CHECK(codeOf([&] { id::decodeTlv(wire::encodeTlv(records)); }) == bad);

    records = wire::decodeTlv(server, bad);
    records.push_back({0x06, {}});
    CHECK(codeOf([&] { id::decodeTlv(wire::encodeTlv(records)); }) == bad);

    records = wire::decodeTlv(server, bad);
    records.erase(records.begin() + 2); // no signature
    CHECK(codeOf([&] { id::decodeTlv(wire::encodeTlv(records)); }) == bad);
}
