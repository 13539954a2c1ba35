// Command-line front end: enrollment, sessions, attack scenarios, accounting
// reports and the certificate registry service.

#include "pufkex/accounting.hpp"
#include "pufkex/error.hpp"
#include "pufkex/harness.hpp"
#include "pufkex/protocol.hpp"
#include "pufkex/registry.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <random>

using namespace pufkex;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAbort = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

std::uint64_t parseU64(const std::string& text)
{
    try
    {
        std::size_t used = 0;
        const bool hex = text.rfind("0x", 0) == 0 || text.rfind("0X", 0) == 0;
        const auto v = std::stoull(hex ? text.substr(2) : text, &used, hex ? 16 : 10);
        if (used != text.size() - (hex ? 2 : 0))
            throw std::invalid_argument(text);
        return v;
    }
    catch (const std::logic_error&)
    {
        throw UsageError("not an unsigned 64-bit integer: '" + text + "'");
    }
}

ByteArray<32> parseSeed32(const std::string& hex)
{
    try
    {
        return arrayFromHex<32>(hex);
    }
    catch (const Error&)
    {
        throw UsageError("expected 64 hex digits, got '" + hex + "'");
    }
}

std::uint64_t randomU64()
{
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) | rd();
}

ByteArray<32> randomSeed32()
{
    std::random_device rd;
    ByteArray<32> out{};
    for (auto& b : out)
        b = static_cast<std::uint8_t>(rd());
    return out;
}

std::string fingerprint(ByteView key)
{
    const auto d = sym::sha256(key);
    return toHex(ByteView(d.data(), 8));
}

proto::Variant variantFrom(const std::string& text)
{
    try
    {
        return proto::parseVariant(text);
    }
    catch (const Error& e)
    {
        throw UsageError(e.what());
    }
}

void checkNoise(double p)
{
    if (!(p >= 0.0 && p < 0.5))
        throw UsageError("--noise must lie in [0, 0.5)");
}

// Options shared by the commands that simulate a device.
struct DeviceFlags
{
    std::string variant = "A";
    std::string seed;
    std::string deviceSeed;
    std::string noiseSeed;
    std::string ttpSeed;
    std::string registry;
    double noise = 0.15;

    void attach(CLI::App* cmd)
    {
        cmd->add_option("--variant", variant, "Protocol variant A, B, C or D")->capture_default_str();
        cmd->add_option("--seed", seed, "Master seed for everything not set explicitly");
        cmd->add_option("--device-seed", deviceSeed, "Seed of the simulated SRAM PUF");
        cmd->add_option("--noise-seed", noiseSeed, "Seed of the readout noise");
        cmd->add_option("--ttp-seed", ttpSeed, "TTP signing seed (64 hex digits)");
        cmd->add_option("--noise", noise, "Bit flip probability of each readout")
            ->capture_default_str();
        cmd->add_option("--registry", registry, "host:port of a registry service (A and C)");
    }

    harness::Scenario scenario(harness::ScenarioKind kind) const
    {
        checkNoise(noise);
        harness::Scenario s;
        s.kind = kind;
        s.variant = variantFrom(variant);
        s.seed = seed.empty() ? randomU64() : parseU64(seed);
        s.noise = noise;
        if (!deviceSeed.empty())
            s.deviceSeed = parseU64(deviceSeed);
        if (!noiseSeed.empty())
            s.noiseSeed = parseU64(noiseSeed);
        if (!ttpSeed.empty())
            s.ttpSeed = parseSeed32(ttpSeed);
        return s;
    }

    std::unique_ptr<reg::RegistryClient> client() const
    {
        if (registry.empty())
            return nullptr;
        std::pair<std::string, std::uint16_t> addr;
        try
        {
            addr = reg::parseAddress(registry);
        }
        catch (const Error& e)
        {
            throw UsageError(e.what());
        }
        return std::make_unique<reg::RegistryClient>(addr.first, addr.second);
    }
};

int cmdTtpKeygen(const std::string& seedHex)
{
    const auto seed = seedHex.empty() ? randomSeed32() : parseSeed32(seedHex);
    const auto keys = curve::SigningKeyPair::fromSeed(seed);
    std::cout << "ttp_seed: " << toHex(seed) << '\n' << "ttp_pk: " << toHex(keys.publicKey) << '\n';
    return kExitOk;
}

int cmdEnroll(const DeviceFlags& flags)
{
    auto s = flags.scenario(harness::ScenarioKind::Honest);
    const auto seeds = harness::scenarioSeeds(s);
    const auto variant = s.variant;
    const auto t = proto::traits(variant);

    auto client = flags.client();
    auto ttp = proto::TtpState::fromSeed(seeds.ttpSeed);
    std::optional<reg::Registry> local;
    if (t.usesCloud)
    {
        if (client)
            ttp.cloud = client.get();
        else
            ttp.cloud = &local.emplace(ttp.keys.publicKey);
    }

    proto::DeviceState dev(id::DeviceId::fromSeed(seeds.deviceSeed),
                           puf::PufDevice::create(seeds.deviceSeed), {s.noise, seeds.noiseSeed});
    if (s.noise == 0.0)
        dev.seedRng(seeds.fallbackRngSeed);
    const auto result = proto::enrollDevice(variant, ttp, dev);

    std::cout << "variant: " << proto::variantChar(variant) << '\n'
              << "device_id: " << dev.id().hex() << '\n'
              << "device_pk: " << toHex(result.cert.pk) << '\n'
              << "ttp_pk: " << toHex(ttp.keys.publicKey) << '\n'
              << "cert_bytes: " << id::encodeTlv(result.cert).size() << '\n'
              << "cert_stored_in: " << (t.usesCloud ? (client ? flags.registry : "memory") : "device-nvm")
              << '\n'
              << "device_nvm_bits: " << dev.nvm().bits() << '\n';
    for (const auto& r : result.log)
        std::cout << "transfer: " << proto::partyName(r.from) << "->" << proto::partyName(r.to) << ' '
                  << proto::msgTypeName(r.type) << ' ' << r.frameBits << " bits\n";
    return kExitOk;
}

int cmdSession(const DeviceFlags& flags, bool upgrade)
{
    auto s = flags.scenario(harness::ScenarioKind::Honest);
    s.ephemeralUpgrade = upgrade;
    auto client = flags.client();
    s.cloud = client.get();
    const auto out = harness::runScenario(s);

    std::cout << "variant: " << proto::variantChar(s.variant) << '\n'
              << "seed: " << s.seed << '\n'
              << "device_id: " << id::DeviceId::fromSeed(harness::scenarioSeeds(s).deviceSeed).hex()
              << '\n';
    for (const auto& r : out.transferLog)
        if (r.stage == proto::Stage::Session)
            std::cout << "message: " << proto::partyName(r.from) << "->" << proto::partyName(r.to)
                      << ' ' << proto::msgTypeName(r.type) << ' ' << r.frameBits << " bits\n";
    if (out.serverSecrets.key)
        std::cout << "server_key_fingerprint: " << fingerprint(*out.serverSecrets.key) << '\n';
    if (out.deviceSecrets.key)
        std::cout << "device_key_fingerprint: " << fingerprint(*out.deviceSecrets.key) << '\n';
    std::cout << "keys_match: " << (out.keysMatch ? "true" : "false") << '\n';
    if (out.abortReason)
        std::cout << "abort_reason: " << proto::abortReasonName(*out.abortReason) << '\n'
                  << "aborted_by: " << proto::partyName(*out.abortedBy) << '\n';
    std::cout << "status: " << (out.confirmed ? "confirmed" : "aborted") << '\n';
    return out.confirmed && out.keysMatch ? kExitOk : kExitAbort;
}

int cmdAttack(const DeviceFlags& flags, const std::string& scenario, std::size_t index,
              std::size_t bit, bool upgrade)
{
    harness::ScenarioKind kind;
    try
    {
        kind = harness::parseScenario(scenario);
    }
    catch (const Error& e)
    {
        throw UsageError(e.what());
    }
    auto s = flags.scenario(kind);
    if (flags.seed.empty())
        s.seed = 1; // attack reports are reproducible unless told otherwise
    s.tamperIndex = index;
    s.tamperBit = bit;
    s.ephemeralUpgrade = upgrade;
    auto client = flags.client();
    s.cloud = client.get();

    const auto out = harness::runScenario(s);
    std::cout << harness::formatReport(out);
    return out.confirmed && out.auditPassed.value_or(true) ? kExitOk : kExitAbort;
}

int cmdAccounting(const std::string& modeText, const std::string& variant, bool properties)
{
    acct::Mode mode;
    try
    {
        mode = acct::parseMode(modeText);
    }
    catch (const Error& e)
    {
        throw UsageError(e.what());
    }
    std::vector<proto::Variant> variants;
    if (variant.empty())
        variants.assign(std::begin(proto::kAllVariants), std::end(proto::kAllVariants));
    else
        variants.push_back(variantFrom(variant));
    std::cout << acct::formatTransferTable(mode, variants);
    if (properties)
        std::cout << '\n' << acct::formatPropertyTable();
    return kExitOk;
}

int cmdRegistryServe(std::uint16_t port, const std::string& bind, const std::string& logPath,
                     const std::string& ttpPk, const std::string& ttpSeed)
{
    if (ttpPk.empty() == ttpSeed.empty())
        throw UsageError("give exactly one of --ttp-pk and --ttp-seed");
    const ByteArray<32> pk = !ttpPk.empty()
                                 ? parseSeed32(ttpPk)
                                 : curve::SigningKeyPair::fromSeed(parseSeed32(ttpSeed)).publicKey;

    // Block the stop signals before any thread starts so sigwait sees them.
    sigset_t stopSignals;
    sigemptyset(&stopSignals);
    sigaddset(&stopSignals, SIGINT);
    sigaddset(&stopSignals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stopSignals, nullptr);

    reg::Registry registry(pk, logPath.empty() ? std::nullopt
                                               : std::optional<std::filesystem::path>(logPath));
    reg::RegistryService service(registry, port, bind);
    std::cout << "records: " << registry.snapshot().size() << '\n'
              << "listening: " << bind << ':' << service.port() << std::endl;

    int sig = 0;
    sigwait(&stopSignals, &sig);
    service.stop();
    std::cout << "stopped: signal " << sig << std::endl;
    return kExitOk;
}

int cmdRegistryClient(const std::string& op, const std::string& address, const std::string& idHex)
{
    std::pair<std::string, std::uint16_t> addr;
    id::DeviceId id;
    try
    {
        addr = reg::parseAddress(address);
        id = id::DeviceId::fromHex(idHex);
    }
    catch (const Error& e)
    {
        throw UsageError(e.what());
    }
    reg::RegistryClient client(addr.first, addr.second);
    try
    {
        if (op == "revoke")
        {
            client.revoke(id);
            std::cout << "revoked: " << id.hex() << '\n';
            return kExitOk;
        }
        const auto rec = client.get(id);
        std::cout << "device_id: " << id.hex() << '\n'
                  << "status: ok\n"
                  << "cert: " << toHex(rec.certBytes) << '\n';
        return kExitOk;
    }
    catch (const Error& e)
    {
        if (e.code() != ErrorCode::NotFound && e.code() != ErrorCode::Revoked)
            throw;
        std::cout << "device_id: " << id.hex() << '\n'
                  << "status: " << (e.code() == ErrorCode::NotFound ? "not-found" : "revoked") << '\n';
        return kExitAbort;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"PUF-rooted ECDH key agreement: simulator, attack harness and registry"};
    app.require_subcommand(1);

    auto* ttp = app.add_subcommand("ttp", "Trusted third party utilities");
    ttp->require_subcommand(1);
    auto* keygen = ttp->add_subcommand("keygen", "Derive a TTP signing key");
    std::string keygenSeed;
    keygen->add_option("--seed", keygenSeed, "Signing seed (64 hex digits)");

    DeviceFlags enrollFlags, sessionFlags, attackFlags;
    auto* enroll = app.add_subcommand("enroll", "Enroll a simulated device (Stage I)");
    enrollFlags.attach(enroll);

    auto* session = app.add_subcommand("session", "Enroll, then run one key agreement (Stage I and II)");
    sessionFlags.attach(session);
    bool sessionUpgrade = false;
    session->add_flag("--ephemeral-upgrade", sessionUpgrade,
                      "A/B: sign a fresh server key with the certified static key");

    auto* attack = app.add_subcommand("attack", "Run an attack scenario and print a report");
    attackFlags.attach(attack);
    std::string scenario = "honest";
    std::size_t tamperIndex = 0, tamperBit = 0;
    bool attackUpgrade = false;
    attack->add_option("--scenario", scenario,
                       "honest|eavesdrop|tamper|replay|mitm|fake-device|tamper-cert")
        ->capture_default_str();
    attack->add_option("--tamper-index", tamperIndex, "Stage II frame to corrupt (tamper)");
    attack->add_option("--tamper-bit", tamperBit, "Bit to flip in that frame or certificate");
    attack->add_flag("--ephemeral-upgrade", attackUpgrade);

    auto* accounting = app.add_subcommand("accounting", "Transfer counts, sizes and NVM per variant");
    std::string mode = "paper", accountingVariant;
    bool properties = false;
    accounting->add_option("--mode", mode, "paper|measured")->capture_default_str();
    accounting->add_option("--variant", accountingVariant, "Restrict to one variant");
    accounting->add_flag("--properties", properties, "Also print the property matrix");

    auto* registry = app.add_subcommand("registry", "Certificate registry service and client");
    registry->require_subcommand(1);
    auto* serve = registry->add_subcommand("serve", "Serve the registry over TCP");
    std::uint16_t port = 0;
    std::string bind = "127.0.0.1", logPath, ttpPk, ttpSeed;
    serve->add_option("--port", port, "TCP port (0 picks one)")->capture_default_str();
    serve->add_option("--bind", bind)->capture_default_str();
    serve->add_option("--log-path", logPath, "Append-only log replayed at startup");
    serve->add_option("--ttp-pk", ttpPk, "TTP public key (64 hex digits)");
    serve->add_option("--ttp-seed", ttpSeed, "TTP signing seed; the public key is derived");

    std::string address, idHex;
    auto* get = registry->add_subcommand("get", "Fetch a device certificate");
    auto* revoke = registry->add_subcommand("revoke", "Revoke a device certificate");
    for (auto* cmd : {get, revoke})
    {
        cmd->add_option("--addr", address, "host:port")->required();
        cmd->add_option("--id", idHex, "Device ID (12 hex digits)")->required();
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try
    {
        if (*keygen)
            return cmdTtpKeygen(keygenSeed);
        if (*enroll)
            return cmdEnroll(enrollFlags);
        if (*session)
            return cmdSession(sessionFlags, sessionUpgrade);
        if (*attack)
            return cmdAttack(attackFlags, scenario, tamperIndex, tamperBit, attackUpgrade);
        if (*accounting)
            return cmdAccounting(mode, accountingVariant, properties);
        if (*serve)
            return cmdRegistryServe(port, bind, logPath, ttpPk, ttpSeed);
        if (*get)
            return cmdRegistryClient("get", address, idHex);
        if (*revoke)
            return cmdRegistryClient("revoke", address, idHex);
    }
    catch (const UsageError& e)
    {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }
    catch (const Error& e)
    {
        std::cerr << "error (" << errorCodeName(e.code()) << "): " << e.what() << '\n';
        return e.code() == ErrorCode::InvalidArgument ? kExitUsage : kExitAbort;
    }
    return kExitUsage;
}
