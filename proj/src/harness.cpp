#include "pufkex/harness.hpp"
#include "pufkex/error.hpp"

#include <memory>
#include <sstream>

namespace pufkex::harness {

namespace {

using proto::Variant;

std::uint64_t drawU64(sym::DrbgState& rng)
{
    const auto b = sym::drawBytes(rng, 8);
    std::uint64_t v = 0;
    for (auto byte : b)
        v = (v << 8) | byte;
    return v;
}

// Flips one bit of the value of `tag` inside a TLV body; the structure stays valid.
Bytes flipInField(ByteView tlv, std::uint8_t tag, std::size_t bit, ErrorCode onError)
{
    auto records = wire::decodeTlv(tlv, onError);
    for (auto& r : records)
        if (r.tag == tag && !r.value.empty())
        {
            bit %= r.value.size() * 8;
            r.value[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        }
    return wire::encodeTlv(records);
}

Bytes replaceField(const proto::ProtocolMessage& msg, std::uint8_t tag, Bytes value)
{
    auto copy = msg;
    for (auto& f : copy.fields)
        if (f.tag == tag)
            f.value = std::move(value);
    return copy.encode();
}

// Hands out certificates whose public key has been altered in storage.
class TamperingStore : public reg::CertStore
{
  public:
    TamperingStore(reg::CertStore& inner, std::size_t bit) : inner_(inner), bit_(bit) {}

    void put(ByteView certTlv) override { inner_.put(certTlv); }
    void revoke(const id::DeviceId& id) override { inner_.revoke(id); }
    reg::RegistryRecord get(const id::DeviceId& id) override
    {
        auto rec = inner_.get(id);
        rec.certBytes = flipInField(rec.certBytes, id::tag::PublicKey, bit_,
                                    ErrorCode::MalformedCertificate);
        return rec;
    }

  private:
    reg::CertStore& inner_;
    std::size_t bit_;
};

struct World
{
    explicit World(const Scenario& s)
        : seeds(scenarioSeeds(s)),
          ttp(proto::TtpState::fromSeed(seeds.ttpSeed)),
          registry(ttp.keys.publicKey),
          dev(id::DeviceId::fromSeed(seeds.deviceSeed), puf::PufDevice::create(seeds.deviceSeed),
              {s.noise, seeds.noiseSeed}, deviceOptions(s)),
          server(proto::ServerState::create(id::DeviceId::fromSeed(~seeds.deviceSeed),
                                            seeds.serverSeed))
    {
        if (s.noise == 0.0)
            dev.seedRng(seeds.fallbackRngSeed);
        const auto t = proto::traits(s.variant);
        if (t.usesCloud)
            ttp.cloud = cloud(s);

        auto devEnroll = proto::enrollDevice(s.variant, ttp, dev);
        log = devEnroll.log;
        if (t.mutualAuth)
        {
            auto srvEnroll = proto::enrollServer(s.variant, ttp, server);
            log.insert(log.end(), srvEnroll.log.begin(), srvEnroll.log.end());
        }
        else
            server.pkTtp = ttp.keys.publicKey; // server-side trust anchor only
    }

    reg::CertStore* cloud(const Scenario& s) { return s.cloud ? s.cloud : &registry; }

    static proto::DeviceOptions deviceOptions(const Scenario& s)
    {
        proto::DeviceOptions o;
        o.strictReconstruct = s.strictReconstruct;
        o.leakSessionKeyForTesting = s.leakSessionKey;
        return o;
    }

    WorldSeeds seeds;
    proto::TtpState ttp;
    reg::Registry registry;
    proto::DeviceState dev;
    proto::ServerState server;
    proto::TransferLog log;
};

} // namespace

std::string_view scenarioName(ScenarioKind k)
{
    switch (k)
    {
    case ScenarioKind::Honest: return "honest";
    case ScenarioKind::Eavesdrop: return "eavesdrop";
    case ScenarioKind::Tamper: return "tamper";
    case ScenarioKind::Replay: return "replay";
    case ScenarioKind::Mitm: return "mitm";
    case ScenarioKind::FakeDevice: return "fake-device";
    case ScenarioKind::TamperCert: return "tamper-cert";
    }
    return "?";
}

ScenarioKind parseScenario(std::string_view name)
{
    for (auto k : kAllScenarios)
        if (scenarioName(k) == name)
            return k;
    throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + std::string(name) + "'");
}

WorldSeeds expandSeed(std::uint64_t seed)
{
    auto rng = sym::DrbgState::fromSeed(seed);
    WorldSeeds w;
    w.deviceSeed = drawU64(rng);
    w.noiseSeed = drawU64(rng);
    w.ttpSeed = sym::drawArray<32>(rng);
    w.serverSeed = sym::drawArray<32>(rng);
    w.attackerSeed = sym::drawArray<32>(rng);
    w.impostorPufSeed = drawU64(rng);
    w.fallbackRngSeed = sym::drawArray<32>(rng);
    return w;
}

WorldSeeds scenarioSeeds(const Scenario& s)
{
    auto w = expandSeed(s.seed);
    if (s.deviceSeed)
        w.deviceSeed = *s.deviceSeed;
    if (s.noiseSeed)
        w.noiseSeed = *s.noiseSeed;
    if (s.ttpSeed)
        w.ttpSeed = *s.ttpSeed;
    return w;
}

Outcome runScenario(const Scenario& s)
{
    World world(s);
    Outcome out;
    out.scenario = s;
    out.deviceNvmBits = world.dev.nvm().bits();

    const auto t = proto::traits(s.variant);
    const bool upgrade = s.ephemeralUpgrade && t.mutualAuth;
    proto::SessionOptions options;
    options.ephemeralUpgrade = upgrade;

    reg::CertStore* store = t.usesCloud ? world.cloud(s) : nullptr;
    std::unique_ptr<TamperingStore> tamperingStore;
    net::Interceptor interceptor;
    bool applied = true;

    switch (s.kind)
    {
    case ScenarioKind::Honest:
    case ScenarioKind::Eavesdrop:
        break;

    case ScenarioKind::Tamper:
        applied = false;
        interceptor = [&](std::size_t index, net::Direction, const Bytes& frame) {
            Bytes copy = frame;
            if (index == s.tamperIndex && !copy.empty())
            {
                const std::size_t bit = s.tamperBit % (copy.size() * 8);
                copy[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
                applied = true;
            }
            return std::vector<Bytes>{copy};
        };
        break;

    case ScenarioKind::Replay: {
        // Record one honest session, then answer every frame of the next
        // session with the frame that held the same position in the old one.
        net::Channel first;
        proto::runSession(s.variant, world.server, world.dev, store, first, options);
        auto old = std::make_shared<std::vector<net::WireEvent>>(first.events());
        applied = false;
        interceptor = [old, &applied](std::size_t index, net::Direction, const Bytes& frame) {
            if (index < old->size() && (*old)[index].sent != frame)
            {
                applied = true;
                return std::vector<Bytes>{(*old)[index].sent};
            }
            return std::vector<Bytes>{frame};
        };
        break;
    }

    case ScenarioKind::Mitm: {
        const auto attacker = curve::AgreementKeyPair::fromSecret(world.seeds.attackerSeed);
        const Bytes fakePk(attacker.publicKey.begin(), attacker.publicKey.end());
        applied = false;
        interceptor = [&, fakePk](std::size_t, net::Direction dir, const Bytes& frame) {
            if (dir != net::Direction::ServerToDevice)
                return std::vector<Bytes>{frame};
            const auto msg = proto::ProtocolMessage::decode(frame);
            if (msg.type == proto::MsgType::EphemeralPk)
            {
                applied = true;
                return std::vector<Bytes>{replaceField(msg, proto::field::PublicKey, fakePk)};
            }
            if (msg.type == proto::MsgType::SessionReq && t.mutualAuth && !upgrade)
            {
                // Static-key variants: swap the key inside the server certificate.
                auto certFields = wire::decodeTlv(msg.require(proto::field::ServerCert),
                                                  ErrorCode::MalformedCertificate);
                for (auto& f : certFields)
                    if (f.tag == id::tag::PublicKey)
                        f.value = fakePk;
                applied = true;
                return std::vector<Bytes>{
                    replaceField(msg, proto::field::ServerCert, wire::encodeTlv(certFields))};
            }
            return std::vector<Bytes>{frame};
        };
        break;
    }

    case ScenarioKind::FakeDevice:
        world.dev.replacePuf(puf::PufDevice::create(world.seeds.impostorPufSeed));
        break;

    case ScenarioKind::TamperCert:
        if (t.usesCloud)
        {
            tamperingStore = std::make_unique<TamperingStore>(*store, s.tamperBit);
            store = tamperingStore.get();
        }
        else
            world.dev.nvm().certTlv = flipInField(*world.dev.nvm().certTlv, id::tag::PublicKey,
                                                  s.tamperBit, ErrorCode::MalformedCertificate);
        break;
    }

    net::Channel channel(interceptor);
    const auto result = proto::runSession(s.variant, world.server, world.dev, store, channel, options);

    out.confirmed = result.confirmed;
    out.keysMatch = result.keysMatch();
    out.abortReason = result.abortReason;
    out.abortedBy = result.abortedBy;
    out.attackApplied = applied;
    out.transcript = channel.events();
    out.recorded = channel.recordedBytes();
    out.transferLog = world.log;
    out.transferLog.insert(out.transferLog.end(), result.log.begin(), result.log.end());
    out.serverSecrets = result.serverSecrets;
    out.deviceSecrets = result.deviceSecrets;
    out.deviceAmbiguousBlocks = result.deviceAmbiguousBlocks;
    if (s.kind == ScenarioKind::Eavesdrop)
        out.auditPassed = eavesdropAudit(out);
    return out;
}

bool eavesdropAudit(const Outcome& outcome)
{
    const proto::SessionSecrets* sides[] = {&outcome.serverSecrets, &outcome.deviceSecrets};
    for (const auto* secrets : sides)
        for (const auto* value : {&secrets->rawSecret, &secrets->clampedSecret,
                                  &secrets->sharedSecret, &secrets->key})
            if (*value && containsSubsequence(outcome.recorded, **value))
                return false;
    return true;
}

bool defended(const Outcome& outcome)
{
    switch (outcome.scenario.kind)
    {
    case ScenarioKind::Honest: return outcome.confirmed && outcome.keysMatch;
    case ScenarioKind::Eavesdrop:
        return outcome.confirmed && outcome.keysMatch && outcome.auditPassed.value_or(false);
    default: return !outcome.confirmed;
    }
}

std::string formatReport(const Outcome& o)
{
    std::ostringstream r;
    r << "scenario: " << scenarioName(o.scenario.kind) << '\n'
      << "variant: " << proto::variantChar(o.scenario.variant) << '\n'
      << "seed: " << o.scenario.seed << '\n'
      << "noise: " << o.scenario.noise << '\n';
    if (o.scenario.ephemeralUpgrade)
        r << "ephemeral_upgrade: true\n";
    if (o.scenario.kind == ScenarioKind::Tamper)
        r << "tamper_index: " << o.scenario.tamperIndex << '\n'
          << "tamper_bit: " << o.scenario.tamperBit << '\n';
    r << "attack_applied: " << (o.attackApplied ? "true" : "false") << '\n';

    for (const auto& ev : o.transcript)
    {
        const bool down = ev.dir == net::Direction::ServerToDevice;
        const auto type = ev.sent.size() > 4 ? static_cast<proto::MsgType>(ev.sent[4])
                                             : proto::MsgType{};
        r << "frame: " << ev.index << ' ' << (down ? "server->device" : "device->server") << ' '
          << proto::msgTypeName(type) << ' ' << ev.sent.size() << "B";
        if (ev.delivered.size() != 1 || ev.delivered.front() != ev.sent)
            r << " intercepted";
        r << '\n';
    }

    r << "confirmed: " << (o.confirmed ? "true" : "false") << '\n'
      << "keys_match: " << (o.keysMatch ? "true" : "false") << '\n';
    if (o.abortReason)
        r << "abort_reason: " << proto::abortReasonName(*o.abortReason) << '\n'
          << "aborted_by: " << proto::partyName(*o.abortedBy) << '\n';
    if (o.auditPassed)
        r << "eavesdrop_audit: " << (*o.auditPassed ? "pass" : "fail") << '\n';

    const bool attack = o.scenario.kind != ScenarioKind::Honest &&
                        o.scenario.kind != ScenarioKind::Eavesdrop;
    if (attack)
        r << "verdict: " << (defended(o) ? "attack-detected" : "attack-succeeded") << '\n';
    else
        r << "verdict: " << (defended(o) ? "ok" : "failed") << '\n';
    return r.str();
}

} // namespace pufkex::harness
