#include "pufkex/error.hpp"
#include "pufkex/protocol.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace pufkex;
using namespace pufkex::proto;

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

ByteArray<32> seed32(std::uint8_t fill)
{
    ByteArray<32> s;
    s.fill(fill);
    return s;
}

// TTP, cloud, device and server for one variant, enrolled and ready for Stage II.
struct Env
{
    Env(Variant v, std::uint64_t seed, double noise = 0.15, DeviceOptions options = {})
        : variant(v),
          ttp(TtpState::fromSeed(seed32(static_cast<std::uint8_t>(seed)))),
          registry(ttp.keys.publicKey),
          dev(id::DeviceId::fromSeed(seed), puf::PufDevice::create(seed), {noise, seed * 31 + 1},
              options),
          server(ServerState::create(id::DeviceId::fromSeed(~seed), seed32(0xee)))
    {
        if (traits(v).usesCloud)
            ttp.cloud = &registry;
        if (noise == 0.0)
            dev.seedRng(seed32(0x11));
        deviceEnrollment = enrollDevice(v, ttp, dev);
        if (traits(v).mutualAuth)
            serverEnrollment = enrollServer(v, ttp, server);
        else
            server.pkTtp = ttp.keys.publicKey;
    }

    reg::CertStore* store() { return traits(variant).usesCloud ? &registry : nullptr; }

    SessionResult run(net::Channel& channel, SessionOptions options = {})
    {
        return runSession(variant, server, dev, store(), channel, options);
    }

    SessionResult run()
    {
        net::Channel channel;
        return run(channel);
    }

    Variant variant;
    TtpState ttp;
    reg::Registry registry;
    DeviceState dev;
    ServerState server;
    DeviceEnrollment deviceEnrollment;
    std::optional<ServerEnrollment> serverEnrollment;
};

std::vector<MsgType> types(const TransferLog& log, Stage stage)
{
    std::vector<MsgType> out;
    for (const auto& r : log)
        if (r.stage == stage)
            out.push_back(r.type);
    return out;
}

std::size_t countDeviceTransfers(const TransferLog& log)
{
    std::size_t n = 0;
    for (const auto& r : log)
        n += r.involves(Party::Device);
    return n;
}

ProtocolMessage decodeAt(const net::Channel& channel, std::size_t index)
{
    return ProtocolMessage::decode(channel.events().at(index).sent);
}

} // namespace

TEST_CASE("variant parsing and traits")
{
    CHECK(parseVariant("a") == Variant::A);
    CHECK(parseVariant("D") == Variant::D);
    CHECK(codeOf([] { parseVariant("E"); }) == ErrorCode::InvalidArgument);
    CHECK(codeOf([] { parseVariant("AB"); }) == ErrorCode::InvalidArgument);

    CHECK(traits(Variant::A).mutualAuth);
    CHECK(traits(Variant::A).usesCloud);
    CHECK_FALSE(traits(Variant::B).usesCloud);
    CHECK(traits(Variant::B).deviceStoresCert);
    CHECK(traits(Variant::C).ephemeralServerKey);
    CHECK_FALSE(traits(Variant::C).deviceStoresTtpKey);
    CHECK(traits(Variant::D).deviceStoresCert);
    CHECK_FALSE(traits(Variant::D).mutualAuth);
}

TEST_CASE("protocol messages")
{
    const ProtocolMessage m{MsgType::HsChallenge, {{field::NonceServer, Bytes(16, 0xab)}}};
    const auto frame = m.encode();
    CHECK(frame.size() == 5 + 5 + 16);
    CHECK(frame[4] == 0x30);
    const auto back = ProtocolMessage::decode(frame);
    CHECK(back.type == MsgType::HsChallenge);
    CHECK(back.fields == m.fields);
    back.expectFields({field::NonceServer});
    CHECK(codeOf([&] { back.expectFields({field::NonceServer, field::Tag}); }) ==
          ErrorCode::MalformedMessage);
    CHECK(codeOf([&] { back.require(field::NonceServer, 32); }) == ErrorCode::MalformedMessage);
    CHECK(codeOf([&] { back.require(field::Tag); }) == ErrorCode::MalformedMessage);

    auto unknown = frame;
    unknown[4] = 0x99;
    CHECK(codeOf([&] { ProtocolMessage::decode(unknown); }) == ErrorCode::MalformedMessage);
    CHECK(msgTypeName(MsgType::EphemeralPk) == "EPHEMERAL_PK");
}

TEST_CASE("device enrollment per variant")
{
    struct Expect
    {
        Variant v;
        std::size_t deviceTransfers;
        std::size_t stageOneTransfers;
        bool pkTtp;
        bool cert;
        bool inCloud;
    };
    const Expect cases[] = {
        {Variant::A, 2, 4, true, false, true},
        {Variant::B, 2, 4, true, true, false},
        {Variant::C, 1, 1, false, false, true},
        {Variant::D, 2, 2, false, true, false},
    };
    for (const auto& c : cases)
    {
        CAPTURE(variantChar(c.v));
        Env env(c.v, 3);
        CHECK(env.dev.enrolled());
        CHECK(env.dev.enrolledVariant() == c.v);
        CHECK(countDeviceTransfers(env.deviceEnrollment.log) == c.deviceTransfers);

        std::size_t stageOne = env.deviceEnrollment.log.size();
        if (env.serverEnrollment)
            stageOne += env.serverEnrollment->log.size();
        CHECK(stageOne == c.stageOneTransfers);

        CHECK(env.dev.nvm().pkTtp.has_value() == c.pkTtp);
        CHECK(env.dev.nvm().certTlv.has_value() == c.cert);
        if (c.pkTtp)
            CHECK(*env.dev.nvm().pkTtp == env.ttp.keys.publicKey);
        if (c.cert)
            CHECK(id::decodeDeviceCert(*env.dev.nvm().certTlv) == env.deviceEnrollment.cert);
        CHECK(env.registry.snapshot().size() == (c.inCloud ? 1u : 0u));
        CHECK(id::verifyCert(env.deviceEnrollment.cert, env.ttp.keys.publicKey));
        CHECK(env.deviceEnrollment.cert.id == env.dev.id());
    }
    // NVM contents: nothing for C, PK_TTP alone for A.
    CHECK(Env(Variant::C, 4).dev.nvm().bits() == 0);
    CHECK(Env(Variant::A, 4).dev.nvm().bits() == 256);
}

TEST_CASE("enrollment preconditions")
{
    Env env(Variant::D, 5);
    CHECK(codeOf([&] { enrollDevice(Variant::D, env.ttp, env.dev); }) == ErrorCode::InvalidState);

    auto ttp = TtpState::fromSeed(seed32(1));
    DeviceState dev(id::DeviceId::fromSeed(1), puf::PufDevice::create(1), {0.1, 1});
    CHECK(codeOf([&] { enrollDevice(Variant::A, ttp, dev); }) == ErrorCode::InvalidState);

    auto server = ServerState::create(id::DeviceId::fromSeed(2), seed32(2));
    CHECK(codeOf([&] { enrollServer(Variant::C, ttp, server); }) == ErrorCode::VariantMismatch);
    CHECK(codeOf([&] { enrollServer(Variant::D, ttp, server); }) == ErrorCode::VariantMismatch);

    // Without readout noise and without external randomness there is no key material.
    DeviceState quiet(id::DeviceId::fromSeed(3), puf::PufDevice::create(3), {0.0, 1});
    CHECK(codeOf([&] { enrollDevice(Variant::D, ttp, quiet); }) == ErrorCode::EnrollmentFailed);

    CHECK(codeOf([] {
              DeviceState(id::DeviceId{}, puf::PufDevice::create(1, 4096), {0.1, 1});
          }) == ErrorCode::SizeMismatch);
}

TEST_CASE("server enrollment")
{
    for (auto v : {Variant::A, Variant::B})
    {
        Env env(v, 6);
        REQUIRE(env.serverEnrollment);
        CHECK(env.serverEnrollment->log.size() == 2);
        CHECK(id::verifyCert(*env.server.cert, env.ttp.keys.publicKey));
        CHECK(env.server.cert->pk == env.server.staticKey->publicKey);
        CHECK(env.server.pkTtp == env.ttp.keys.publicKey);
    }
}

TEST_CASE("honest sessions confirm with equal keys and the expected message flow")
{
    using M = MsgType;
    const std::pair<Variant, std::vector<M>> flows[] = {
        {Variant::A, {M::SessionReq, M::HsChallenge, M::HsResponse, M::HsConfirm}},
        {Variant::B, {M::SessionReq, M::CertPush, M::HsChallenge, M::HsResponse, M::HsConfirm}},
        {Variant::C, {M::SessionReq, M::EphemeralPk, M::HsChallenge, M::HsResponse}},
        {Variant::D, {M::SessionReq, M::CertPush, M::EphemeralPk, M::HsChallenge, M::HsResponse}},
    };
    for (const auto& [v, flow] : flows)
    {
        CAPTURE(variantChar(v));
        Env env(v, 10);
        const auto r = env.run();
        CHECK(r.confirmed);
        CHECK(r.keysMatch());
        CHECK_FALSE(r.abortReason);
        CHECK(r.serverPhase == Phase::Established);
        CHECK(r.devicePhase == Phase::Established);
        CHECK(types(r.log, Stage::Session) == flow);
        CHECK(*r.serverSecrets.sharedSecret == *r.deviceSecrets.sharedSecret);
        CHECK(r.deviceAmbiguousBlocks == 0);
    }
}

TEST_CASE("honest sessions over many seeds")
{
    for (auto v : kAllVariants)
        for (std::uint64_t seed = 100; seed < 125; ++seed)
        {
            CAPTURE(variantChar(v));
            CAPTURE(seed);
            Env env(v, seed);
            const auto r = env.run();
            CHECK(r.confirmed);
            CHECK(r.keysMatch());
        }
}

TEST_CASE("noiseless PUF with an externally seeded generator")
{
    for (auto v : kAllVariants)
    {
        Env env(v, 12, 0.0);
        CHECK(env.run().confirmed);
    }
}

TEST_CASE("several sessions after one enrollment")
{
    Env env(Variant::B, 13);
    for (int i = 0; i < 5; ++i)
        CHECK(env.run().confirmed);
}

TEST_CASE("session key derivation")
{
    const Bytes w(32, 0x5a);
    const auto t1 = testsupport::str("transcript one");
    const auto t2 = testsupport::str("transcript two");
    const auto k = deriveSessionKey(w, Variant::A, t1);
    CHECK(k == deriveSessionKey(w, Variant::A, t1));
    CHECK(k != deriveSessionKey(w, Variant::A, t2));
    CHECK(k != deriveSessionKey(w, Variant::B, t1));

    const auto salt = sym::sha256(t1);
    const auto expected = sym::hkdf(salt, w, testsupport::str("pufkex-v1A"), 32);
    CHECK(Bytes(k.begin(), k.end()) == expected);

    CHECK(codeOf([] { deriveSessionKey(Bytes(32, 0), Variant::C, {}); }) == ErrorCode::LowOrderResult);

    // Sampled: distinct transcripts never collide.
    std::set<SessionKey> seen;
    for (int i = 0; i < 200; ++i)
        seen.insert(deriveSessionKey(w, Variant::D, testsupport::str("t" + std::to_string(i))));
    CHECK(seen.size() == 200);
}

TEST_CASE("confirmation tags")
{
    SessionKey k{};
    k[0] = 1;
    const Bytes ns(16, 0x01), nd(16, 0x02);
    Bytes preimage = testsupport::str("dev-confirm");
    append(preimage, ns);
    CHECK(deviceConfirmTag(k, ns) == sym::hmacSha256(k, preimage));
    preimage = testsupport::str("srv-confirm");
    append(preimage, nd);
    append(preimage, ns);
    CHECK(serverConfirmTag(k, nd, ns) == sym::hmacSha256(k, preimage));

    auto other = k;
    other[31] ^= 0x80;
    CHECK(deviceConfirmTag(k, ns) != deviceConfirmTag(other, ns));
    CHECK(serverConfirmTag(k, nd, ns) != serverConfirmTag(other, nd, ns));
    CHECK(deviceConfirmTag(k, ns) != serverConfirmTag(k, nd, ns));
}

TEST_CASE("ephemeral server keys are fresh per session")
{
    for (auto v : {Variant::C, Variant::D})
    {
        Env env(v, 14);
        net::Channel first, second;
        CHECK(env.run(first).confirmed);
        CHECK(env.run(second).confirmed);
        auto ephemeral = [](const net::Channel& ch) {
            for (const auto& ev : ch.events())
            {
                const auto m = ProtocolMessage::decode(ev.sent);
                if (m.type == MsgType::EphemeralPk)
                    return m.require(field::PublicKey, 32);
            }
            return Bytes{};
        };
        CHECK_FALSE(ephemeral(first).empty());
        CHECK(ephemeral(first) != ephemeral(second));
    }
}

TEST_CASE("ephemeral upgrade for the static-key variants")
{
    for (auto v : {Variant::A, Variant::B})
    {
        CAPTURE(variantChar(v));
        Env env(v, 15);
        SessionOptions opts;
        opts.ephemeralUpgrade = true;

        net::Channel first, second;
        const auto r1 = env.run(first, opts);
        const auto r2 = env.run(second, opts);
        CHECK(r1.confirmed);
        CHECK(r2.confirmed);
        CHECK(r1.log.size() == (v == Variant::A ? 5u : 6u));
        CHECK(*r1.deviceSecrets.sharedSecret != *r2.deviceSecrets.sharedSecret);

        // Without the upgrade both keys are static, and so is everything the
        // key derivation sees: the session key repeats.
        const auto s1 = env.run();
        const auto s2 = env.run();
        CHECK(s1.confirmed);
        CHECK(*s1.deviceSecrets.sharedSecret == *s2.deviceSecrets.sharedSecret);
        CHECK(*s1.deviceSecrets.key == *s2.deviceSecrets.key);
    }
}

TEST_CASE("ephemeral upgrade rejects an unsigned key substitution")
{
    Env env(Variant::A, 16);
    const auto attacker = curve::AgreementKeyPair::fromSecret(seed32(0x66));
    net::Channel channel([&](std::size_t, net::Direction, const Bytes& frame) {
        auto m = ProtocolMessage::decode(frame);
        if (m.type == MsgType::EphemeralPk)
        {
            for (auto& f : m.fields)
                if (f.tag == field::PublicKey)
                    f.value.assign(attacker.publicKey.begin(), attacker.publicKey.end());
            return std::vector<Bytes>{m.encode()};
        }
        return std::vector<Bytes>{frame};
    });
    SessionOptions opts;
    opts.ephemeralUpgrade = true;
    const auto r = env.run(channel, opts);
    CHECK_FALSE(r.confirmed);
    CHECK(r.abortReason == AbortReason::EphemeralSignatureInvalid);
    CHECK(r.abortedBy == Party::Device);
}

TEST_CASE("un-enrolled silicon fails the handshake")
{
    for (auto v : kAllVariants)
    {
        CAPTURE(variantChar(v));
        Env env(v, 17);
        env.dev.replacePuf(puf::PufDevice::create(9999));
        const auto r = env.run();
        CHECK_FALSE(r.confirmed);
        CHECK(r.abortReason == AbortReason::HandshakeMacMismatch);
        CHECK(r.abortedBy == Party::Server);
        CHECK(r.deviceAmbiguousBlocks > 0);
    }
}

TEST_CASE("strict reconstruction aborts on the device instead")
{
    DeviceOptions strict;
    strict.strictReconstruct = true;
    Env env(Variant::D, 18, 0.15, strict);
    CHECK(env.run().confirmed);
    env.dev.replacePuf(puf::PufDevice::create(4242));
    const auto r = env.run();
    CHECK(r.abortReason == AbortReason::ReconstructFailed);
    CHECK(r.abortedBy == Party::Device);
    CHECK(r.log.size() == 1); // nothing leaves the device
}

TEST_CASE("registry lookups gate cloud variants")
{
    for (auto v : {Variant::A, Variant::C})
    {
        CAPTURE(variantChar(v));
        Env env(v, 19);
        env.registry.revoke(env.dev.id());
        auto r = env.run();
        CHECK(r.abortReason == AbortReason::CertRevoked);
        CHECK(r.abortedBy == Party::Server);
        CHECK(r.log.empty());

        Env other(v, 20);
        reg::Registry empty(other.ttp.keys.publicKey);
        net::Channel channel;
        r = runSession(v, other.server, other.dev, &empty, channel);
        CHECK(r.abortReason == AbortReason::CertNotFound);
    }
}

TEST_CASE("a certificate for a low-order key aborts the key agreement")
{
    Env env(Variant::B, 21);
    // A TTP that signs anything: the server certificate names the point u = 0.
    env.server.cert = id::issueServerCert(env.ttp.keys, env.server.id, curve::PublicKey{});
    const auto r = env.run();
    CHECK(r.abortReason == AbortReason::LowOrderResult);
    CHECK(r.abortedBy == Party::Device);
}

TEST_CASE("the device checks that the request names it")
{
    Env env(Variant::B, 22);
    ServerSession server(Variant::B, env.server, id::DeviceId::fromSeed(12345), nullptr);
    DeviceSession device(Variant::B, env.dev);
    const auto req = server.start();
    REQUIRE(req.size() == 1);
    CHECK(device.onFrame(req[0]).empty());
    CHECK(device.abortReason() == AbortReason::IdentityMismatch);
}

TEST_CASE("the server checks that the pushed certificate names the target")
{
    Env env(Variant::D, 23);
    // A second genuine device enrolled by the same TTP answers in place of the target.
    DeviceState other(id::DeviceId::fromSeed(777), puf::PufDevice::create(777), {0.15, 5});
    enrollDevice(Variant::D, env.ttp, other);

    ServerSession server(Variant::D, env.server, env.dev.id(), nullptr);
    DeviceSession device(Variant::D, other);
    auto req = ProtocolMessage::decode(server.start().at(0));
    req.fields[0].value.assign(other.id().bytes.begin(), other.id().bytes.end());
    const auto push = device.onFrame(req.encode());
    REQUIRE(push.size() == 1);
    CHECK(server.onFrame(push[0]).empty());
    CHECK(server.abortReason() == AbortReason::IdentityMismatch);
}

TEST_CASE("state machines reject out-of-order and malformed input and stay aborted")
{
    Env env(Variant::A, 25);
    DeviceSession device(Variant::A, env.dev);
    const auto challenge =
        ProtocolMessage{MsgType::HsChallenge, {{field::NonceServer, Bytes(16, 1)}}}.encode();
    CHECK(device.onFrame(challenge).empty());
    CHECK(device.phase() == Phase::Aborted);
    CHECK(device.abortReason() == AbortReason::UnexpectedMessage);

    // Once aborted, even a perfectly valid request is ignored.
    ServerSession server(Variant::A, env.server, env.dev.id(), &env.registry);
    const auto req = server.start();
    CHECK(device.onFrame(req.at(0)).empty());
    CHECK(device.abortReason() == AbortReason::UnexpectedMessage);

    DeviceSession fresh(Variant::A, env.dev);
    CHECK(fresh.onFrame(testsupport::hex("0000")).empty());
    CHECK(fresh.abortReason() == AbortReason::MalformedMessage);

    // Unknown extra field.
    auto msg = ProtocolMessage::decode(req.at(0));
    msg.fields.push_back({field::Debug, {}});
    DeviceSession picky(Variant::A, env.dev);
    CHECK(picky.onFrame(msg.encode()).empty());
    CHECK(picky.abortReason() == AbortReason::MalformedMessage);

    CHECK(codeOf([&] { server.start(); }) == ErrorCode::InvalidState);
}

TEST_CASE("a response replayed from an earlier session is rejected")
{
    for (auto v : kAllVariants)
    {
        CAPTURE(variantChar(v));
        Env env(v, 26);
        net::Channel first;
        REQUIRE(env.run(first).confirmed);
        Bytes oldResponse;
        for (const auto& ev : first.events())
            if (ev.sent[4] == static_cast<std::uint8_t>(MsgType::HsResponse))
                oldResponse = ev.sent;

        net::Channel second([&](std::size_t, net::Direction, const Bytes& frame) {
            if (frame[4] == static_cast<std::uint8_t>(MsgType::HsResponse))
                return std::vector<Bytes>{oldResponse};
            return std::vector<Bytes>{frame};
        });
        const auto r = env.run(second);
        CHECK_FALSE(r.confirmed);
        CHECK(r.abortReason == AbortReason::HandshakeMacMismatch);
    }
}

TEST_CASE("single-bit tampering of any Stage II frame is detected")
{
    for (auto v : kAllVariants)
    {
        Env probe(v, 27);
        net::Channel honest;
        REQUIRE(probe.run(honest).confirmed);
        const auto frames = honest.events();
        for (std::size_t index = 0; index < frames.size(); ++index)
        {
            const std::size_t bits = frames[index].sent.size() * 8;
            for (std::size_t bit : {std::size_t{0}, std::size_t{37}, bits / 2, bits - 1, bits - 9})
            {
                CAPTURE(variantChar(v));
                CAPTURE(index);
                CAPTURE(bit);
                Env env(v, 27);
                net::Channel channel([&](std::size_t i, net::Direction, const Bytes& frame) {
                    Bytes copy = frame;
                    if (i == index)
                        copy[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
                    return std::vector<Bytes>{copy};
                });
                const auto r = env.run(channel);
                CHECK_FALSE(r.confirmed);
                CHECK(r.abortReason.has_value());
            }
        }
    }
}

TEST_CASE("leak switch puts the session key on the wire")
{
    DeviceOptions leaky;
    leaky.leakSessionKeyForTesting = true;
    Env env(Variant::C, 28, 0.15, leaky);
    net::Channel channel;
    const auto r = env.run(channel);
    REQUIRE(r.deviceSecrets.key);
    CHECK(containsSubsequence(channel.recordedBytes(), *r.deviceSecrets.key));
    // The server accepts no fields beyond the ones it expects.
    CHECK(r.abortReason == AbortReason::MalformedMessage);
}
