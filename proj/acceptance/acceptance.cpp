// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance <path-to-pufkex-binary>

#include "pufkex/accounting.hpp"
#include "pufkex/curve25519.hpp"
#include "pufkex/ed25519.hpp"
#include "pufkex/error.hpp"
#include "pufkex/fuzzy_extractor.hpp"
#include "pufkex/harness.hpp"
#include "pufkex/protocol.hpp"
#include "pufkex/registry.hpp"
#include "pufkex/symmetric.hpp"
#include "pufkex/transport.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

extern char** environ;

using namespace pufkex;
using proto::Variant;

namespace {

constexpr Variant kVariants[] = {Variant::A, Variant::B, Variant::C, Variant::D};

// Runtime limits per criterion; zero means none.
constexpr double kLimitSeconds[8] = {0, 1.0, 0, 30.0, 120.0, 0, 0, 0};

constexpr double kNoise = 0.15;
constexpr int kHonestRuns = 1000;
constexpr int kReconstructions = 10000;
constexpr int kOraclePatterns = 1000;
constexpr int kMaxCorrectable = 31;
constexpr int kFakeDeviceRuns = 100;
constexpr int kReplaySeeds = 100;

struct Check
{
    bool ok = true;
    std::ostringstream detail;

    void expect(bool cond, const std::string& what)
    {
        if (!cond && ok)
        {
            ok = false;
            detail << what;
        }
        else if (!cond)
            detail << "; " << what;
    }
};

std::string hexOf(ByteView b)
{
    return toHex(b);
}

// --- 1 -----------------------------------------------------------------------

void tableThree(Check& c)
{
    struct Cell
    {
        Variant v;
        std::size_t t1, t2, total, b1, b2, bits, nvm;
    };
    const Cell golden[] = {
        {Variant::A, 4, 4, 8, 6576, 6736, 13312, 256},
        {Variant::B, 4, 5, 9, 6832, 7296, 14128, 6832},
        {Variant::C, 1, 4, 5, 6320, 6368, 12688, 0},
        {Variant::D, 2, 5, 7, 6576, 6928, 13504, 6576},
    };
    int cells = 0;
    for (const auto& g : golden)
    {
        const auto col = acct::column(g.v, acct::Mode::Paper);
        const std::string v(1, proto::variantChar(g.v));
        auto cell = [&](std::size_t got, std::size_t want, const char* name) {
            ++cells;
            c.expect(got == want, v + " " + name + " " + std::to_string(got) + " != " + std::to_string(want));
        };
        cell(col.transfers[0], g.t1, "transfers I");
        cell(col.transfers[1], g.t2, "transfers II");
        cell(col.totalTransfers(), g.total, "transfers total");
        cell(col.bits[0], g.b1, "bits I");
        cell(col.bits[1], g.b2, "bits II");
        cell(col.totalBits(), g.bits, "bits total");
        cell(col.nvmBits, g.nvm, "nvm");
        cell(acct::nvmRequirement(g.v), g.nvm, "nvmRequirement");
    }
    if (c.ok)
        c.detail << cells << " cells";
}

// --- 2 -----------------------------------------------------------------------

void tableTwo(Check& c)
{
    using acct::CertManagement;
    using acct::NvmClass;
    const std::vector<acct::PropertyRow> expected = {
        {Variant::A, true, true, NvmClass::Negligible, true, CertManagement::Online, true},
        {Variant::B, true, true, NvmClass::Large, false, CertManagement::Offline, true},
        {Variant::C, true, false, NvmClass::None, true, CertManagement::Online, false},
        {Variant::D, true, false, NvmClass::Large, false, CertManagement::Offline, false},
    };
    const auto got = acct::propertyMatrix();
    c.expect(got.size() == expected.size(), "row count");
    for (std::size_t i = 0; i < std::min(got.size(), expected.size()); ++i)
        c.expect(got[i] == expected[i], std::string("row ") + proto::variantChar(expected[i].variant));
    if (c.ok)
        c.detail << "4 rows x 6 properties";
}

// --- 3 -----------------------------------------------------------------------

void cryptoVectors(Check& c)
{
    using curve::x25519;
    int n = 0;
    auto eq = [&](const std::string& got, const char* want, const char* name) {
        ++n;
        c.expect(got == want, name);
    };

    eq(hexOf(x25519(fromHex("a546e36bf0527c9d3b16154b82465edd62144c0ac1fc5a18506a2244ba449ac4"),
                    fromHex("e6db6867583030db3594c1a424b15f7c726624ec26b3353b10a903a6d0ab1c4c"))),
       "c3da55379de9c6908e94ea4df28d084f32eccf03491c71f754b4075577a28552", "x25519 vector 1");
    eq(hexOf(x25519(fromHex("4b66e9d4d1b4673c5ad22691957d6af5c11b6421e0ea01d42ca4169e7918ba0d"),
                    fromHex("e5210f12786811d3f4b7959d0538ae2c31dbe7106fc03c3efc4cd549c715a493"))),
       "95cbde9476e8907d7aade45cb4b873f88b595a68799fa152e6f8f7647aac7957", "x25519 vector 2");

    Bytes k = fromHex("0900000000000000000000000000000000000000000000000000000000000000");
    Bytes u = k;
    for (int i = 1; i <= 1000; ++i)
    {
        const auto out = x25519(k, u);
        u = k;
        k.assign(out.begin(), out.end());
        if (i == 1)
            eq(hexOf(k), "422c8e7a6227d7bca1350b3e2bb7279f7897b87bb6854b783c60e80311ae3079",
               "x25519 iterated x1");
    }
    eq(hexOf(k), "684cf59ba83309552800ef566f2f4d3c1c3887c49360e3875f2eb94d99532c51",
       "x25519 iterated x1000");

    struct Ed
    {
        const char *seed, *pk, *msg, *sig;
    };
    const Ed eds[] = {
        {"9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60",
         "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a", "",
         "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b"},
        {"4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb",
         "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c", "72",
         "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da085ac1e43e15996e458f3613d0f11d8c387b2eaeb4302aeeb00d291612bb0c00"},
        {"c5aa8df43f9f837bedb7442f31dcb7b166d38535076f094b85ce3a2e0b4458f7",
         "fc51cd8e6218a1a38da47ed00230f0580816ed13ba3303ac5deb911548908025", "af82",
         "6291d657deec24024827e69c3abe01a30ce548a284743a445e3680d7db5ac3ac18ff9b538d16f290ae67f760984dc6594a7c15e9716ed28dc027beceea1ec40a"},
    };
    for (const auto& e : eds)
    {
        const auto kp = curve::SigningKeyPair::fromSeed(fromHex(e.seed));
        const auto msg = fromHex(e.msg);
        const auto sig = curve::edSign(kp, msg);
        eq(hexOf(kp.publicKey), e.pk, "ed25519 public key");
        eq(hexOf(sig.bytes), e.sig, "ed25519 signature");
        ++n;
        c.expect(curve::edVerify(kp.publicKey, msg, sig), "ed25519 verify");
    }

    auto str = [](const std::string& s) { return Bytes(s.begin(), s.end()); };
    eq(hexOf(sym::sha256({})), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855", "sha256 empty");
    eq(hexOf(sym::sha256(str("abc"))), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
       "sha256 abc");
    eq(hexOf(sym::sha256(str("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))),
       "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1", "sha256 448-bit");

    eq(hexOf(sym::hmacSha256(Bytes(20, 0x0b), str("Hi There"))),
       "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7", "hmac tc1");
    eq(hexOf(sym::hmacSha256(str("Jefe"), str("what do ya want for nothing?"))),
       "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843", "hmac tc2");
    eq(hexOf(sym::hmacSha256(Bytes(20, 0xaa), Bytes(50, 0xdd))),
       "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe", "hmac tc3");

    eq(hexOf(sym::hkdf(fromHex("000102030405060708090a0b0c"), Bytes(22, 0x0b), fromHex("f0f1f2f3f4f5f6f7f8f9"), 42)),
       "3cb25f25faacd57a90434f64d0362f2a2d2d0a90cf1a5a4c5db02d56ecc4c5bf34007208d5b887185865", "hkdf a.1");
    Bytes ikm(80), salt(80), info(80);
    std::iota(ikm.begin(), ikm.end(), std::uint8_t{0x00});
    std::iota(salt.begin(), salt.end(), std::uint8_t{0x60});
    std::iota(info.begin(), info.end(), std::uint8_t{0xb0});
    eq(hexOf(sym::hkdf(salt, ikm, info, 82)),
       "b11e398dc80327a1c8e7f78c596a49344f012eda2d4efad8a050cc4c19afa97c59045a99cac7827271cb41c65e590e09da3275600c2f09b8367793a9aca3db71cc30c58179ec3e87c14c01d5c1f3434f1d87",
       "hkdf a.2");
    eq(hexOf(sym::hkdf({}, Bytes(22, 0x0b), {}, 42)),
       "8da4e775a563c18f715f802a063c5a31b8a11f5c5ee1879ec3454e5f3c738d2d9d201395faa4b61a96c8", "hkdf a.3");

    if (c.ok)
        c.detail << n << " vectors";
}

// --- 4 -----------------------------------------------------------------------

void endToEnd(Check& c)
{
    std::size_t runs = 0;
    for (auto v : kVariants)
    {
        int failures = 0;
        for (int i = 0; i < kHonestRuns; ++i)
        {
            harness::Scenario s;
            s.variant = v;
            s.seed = 1'000'000 + static_cast<std::uint64_t>(i);
            s.noise = kNoise;
            const auto o = harness::runScenario(s);
            failures += !(o.confirmed && o.keysMatch);
            ++runs;
        }
        c.expect(failures == 0, std::string(1, proto::variantChar(v)) + ": " + std::to_string(failures) + " failures");
    }
    if (c.ok)
        c.detail << runs << " runs at p=" << kNoise << ", all confirmed with equal keys";
}

// --- 5 -----------------------------------------------------------------------

using Word128 = std::pair<std::uint64_t, std::uint64_t>;

Word128 pack(const BitVector& w)
{
    Word128 out{0, 0};
    for (std::size_t i = 0; i < 128; ++i)
        if (w.get(i))
            (i < 64 ? out.first : out.second) |= std::uint64_t{1} << (i % 64);
    return out;
}

void extractorReliability(Check& c)
{
    const fe::CodeParams params;
    std::mt19937_64 rng(20240615);

    int failures = 0;
    for (int i = 0; i < kReconstructions; ++i)
    {
        // A fresh device every 100 trials, a fresh readout every trial.
        const auto dev = puf::PufDevice::create(static_cast<std::uint64_t>(i / 100) + 7);
        fe::SecretKey secret;
        for (auto& b : secret.bytes)
            b = static_cast<std::uint8_t>(rng());
        const auto hd = fe::enroll(dev.reference(), secret, params);
        const auto noisy = puf::readout(dev, {kNoise, static_cast<std::uint64_t>(i) * 7919 + 3});
        const auto got = fe::reconstructDetailed(noisy, hd, params);
        failures += got.ambiguousBlocks != 0 || !(got.secret == secret);
    }
    c.expect(failures == 0, std::to_string(failures) + " reconstruction failures at p=0.15");

    int exact = 0;
    for (int i = 0; i < 100; ++i)
    {
        const auto dev = puf::PufDevice::create(static_cast<std::uint64_t>(i) + 5000);
        fe::SecretKey secret;
        for (auto& b : secret.bytes)
            b = static_cast<std::uint8_t>(rng());
        const auto hd = fe::enroll(dev.reference(), secret, params);
        exact += fe::reconstruct(puf::readout(dev, {0.0, 1}), hd, params) == secret;
    }
    c.expect(exact == 100, "p=0 recovery " + std::to_string(exact) + "/100");

    std::vector<Word128> codewords;
    for (std::uint32_t m = 0; m < 256; ++m)
        codewords.push_back(pack(fe::rmEncode(m)));

    std::vector<std::size_t> positions(128);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    int mismatches = 0;
    for (std::uint32_t msg = 0; msg < 256; ++msg)
        for (int t = 0; t < kOraclePatterns; ++t)
        {
            auto word = fe::rmEncode(msg);
            std::shuffle(positions.begin(), positions.end(), rng);
            const auto weight = static_cast<std::size_t>(rng() % (kMaxCorrectable + 1));
            for (std::size_t j = 0; j < weight; ++j)
                word.flip(positions[j]);

            const auto packed = pack(word);
            int best = 129, bestCount = 0;
            std::uint32_t oracle = 0;
            for (std::uint32_t m = 0; m < 256; ++m)
            {
                const int d = std::popcount(packed.first ^ codewords[m].first) +
                              std::popcount(packed.second ^ codewords[m].second);
                if (d < best)
                {
                    best = d;
                    bestCount = 1;
                    oracle = m;
                }
                else if (d == best)
                    ++bestCount;
            }
            const auto dec = fe::rmDecodeDetailed(word);
            mismatches += bestCount != 1 || oracle != msg || dec.ambiguous || dec.message != oracle;
        }
    c.expect(mismatches == 0, std::to_string(mismatches) + " decoder/oracle mismatches");

    if (c.ok)
        c.detail << kReconstructions << " reconstructions, 0 failures; p=0 exact 100/100; " << 256 * kOraclePatterns
                 << " patterns of <=" << kMaxCorrectable << " errors match the oracle";
}

// --- 6 -----------------------------------------------------------------------

harness::Outcome run(harness::ScenarioKind kind, Variant v, std::uint64_t seed,
                     const std::function<void(harness::Scenario&)>& tweak = {})
{
    harness::Scenario s;
    s.kind = kind;
    s.variant = v;
    s.seed = seed;
    s.noise = kNoise;
    if (tweak)
        tweak(s);
    return harness::runScenario(s);
}

bool aborted(const harness::Outcome& o)
{
    return !o.confirmed && o.abortReason.has_value() && o.attackApplied;
}

void attackSuite(Check& c)
{
    using K = harness::ScenarioKind;
    std::map<std::string, int> runs;
    for (auto v : kVariants)
    {
        const std::string name(1, proto::variantChar(v));

        int caught = 0;
        for (int i = 0; i < kFakeDeviceRuns; ++i)
            caught += aborted(run(K::FakeDevice, v, 100 + static_cast<std::uint64_t>(i)));
        c.expect(caught == kFakeDeviceRuns, name + " fake-device " + std::to_string(caught) + "/100");
        runs["fake-device"] += kFakeDeviceRuns;

        // Every Stage II frame; all bits of small frames, a stride through large ones.
        const auto honest = run(K::Honest, v, 42);
        for (std::size_t index = 0; index < honest.transcript.size(); ++index)
        {
            const std::size_t bits = honest.transcript[index].sent.size() * 8;
            const std::size_t stride = bits <= 1024 ? 1 : 61;
            for (std::size_t bit = 0; bit < bits; bit += stride)
            {
                const auto o = run(K::Tamper, v, 42, [&](harness::Scenario& s) {
                    s.tamperIndex = index;
                    s.tamperBit = bit;
                });
                ++runs["tamper"];
                c.expect(aborted(o), name + " tamper frame " + std::to_string(index) + " bit " + std::to_string(bit));
            }
        }

        for (int i = 0; i < kReplaySeeds; ++i)
        {
            ++runs["replay"];
            c.expect(aborted(run(K::Replay, v, 500 + static_cast<std::uint64_t>(i))), name + " replay");
        }

        for (bool upgrade : {false, true})
            for (std::uint64_t seed = 1; seed <= 25; ++seed)
            {
                ++runs["mitm"];
                c.expect(aborted(run(K::Mitm, v, seed, [&](harness::Scenario& s) { s.ephemeralUpgrade = upgrade; })),
                         name + " mitm");
            }

        for (std::uint64_t seed = 1; seed <= 25; ++seed)
        {
            const auto o = run(K::TamperCert, v, seed, [&](harness::Scenario& s) { s.tamperBit = seed * 13; });
            ++runs["tamper-cert"];
            c.expect(aborted(o) && o.abortReason == proto::AbortReason::CertInvalid, name + " tamper-cert");
        }

        for (std::uint64_t seed = 1; seed <= 100; ++seed)
        {
            const auto o = run(K::Eavesdrop, v, seed);
            ++runs["eavesdrop"];
            c.expect(o.confirmed && o.auditPassed.value_or(false), name + " eavesdrop audit");
        }
    }
    auto control = run(K::Eavesdrop, Variant::A, 1, [](harness::Scenario& s) { s.leakSessionKey = true; });
    c.expect(control.auditPassed == false, "audit missed the leaked key");

    if (c.ok)
    {
        const char* sep = "";
        for (const auto& [k, n] : runs)
        {
            c.detail << sep << k << " " << n << "/" << n;
            sep = ", ";
        }
    }
}

// --- 7 -----------------------------------------------------------------------

struct Server
{
    pid_t pid = -1;
    std::uint16_t port = 0;
};

Server spawnRegistry(const std::string& binary, const std::filesystem::path& log, const std::string& ttpSeedHex)
{
    int fds[2];
    if (::pipe(fds) != 0)
        throw Error(ErrorCode::Io, "pipe");
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, fds[0]);

    std::vector<std::string> args = {binary, "registry", "serve", "--port", "0", "--bind", "127.0.0.1",
                                     "--log-path", log.string(), "--ttp-seed", ttpSeedHex};
    std::vector<char*> argv;
    for (auto& a : args)
        argv.push_back(a.data());
    argv.push_back(nullptr);

    Server s;
    const int rc = posix_spawn(&s.pid, binary.c_str(), &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    if (rc != 0)
    {
        ::close(fds[0]);
        throw Error(ErrorCode::Io, "cannot start " + binary);
    }

    FILE* out = ::fdopen(fds[0], "r");
    char line[256];
    while (std::fgets(line, sizeof line, out))
    {
        const std::string text(line);
        if (text.rfind("listening: ", 0) == 0)
        {
            s.port = static_cast<std::uint16_t>(std::stoi(text.substr(text.rfind(':') + 1)));
            break;
        }
    }
    std::fclose(out);
    if (s.port == 0)
        throw Error(ErrorCode::Io, "registry did not report a port");
    return s;
}

void killHard(Server& s)
{
    ::kill(s.pid, SIGKILL);
    int status = 0;
    ::waitpid(s.pid, &status, 0);
    s.pid = -1;
}

// Observable state through the service: certificate bytes or a status.
std::map<std::string, std::string> observe(reg::RegistryClient& client, const std::vector<id::DeviceId>& ids)
{
    std::map<std::string, std::string> out;
    for (const auto& id : ids)
    {
        std::string value;
        try
        {
            value = "ok " + toHex(client.get(id).certBytes);
        }
        catch (const Error& e)
        {
            value = std::string(errorCodeName(e.code()));
        }
        out[toHex(id.bytes)] = value;
    }
    return out;
}

void registryDurability(Check& c, const std::string& binary)
{
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / ("pufkex-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto log = dir / "registry.log";

    auto drbg = sym::DrbgState::fromSeed(77);
    const auto ttpSeed = sym::drawArray<32>(drbg);
    auto server = spawnRegistry(binary, log, toHex(ttpSeed));

    std::vector<id::DeviceId> ids;
    std::vector<std::unique_ptr<proto::DeviceState>> devices;
    auto client = std::make_unique<reg::RegistryClient>("127.0.0.1", server.port);
    auto ttp = proto::TtpState::fromSeed(ttpSeed, client.get());
    for (std::uint64_t d = 1; d <= 6; ++d)
    {
        auto dev = std::make_unique<proto::DeviceState>(id::DeviceId::fromSeed(d * 1009), puf::PufDevice::create(d * 1009),
                                                        puf::NoiseModel{kNoise, d});
        proto::enrollDevice(Variant::A, ttp, *dev);
        ids.push_back(dev->id());
        devices.push_back(std::move(dev));
    }
    auto serverState = proto::ServerState::create(id::DeviceId::fromSeed(0xabc), Bytes(32, 0x5a));
    proto::enrollServer(Variant::A, ttp, serverState);

    // A healthy session first, so the later abort is down to the revocation.
    {
        net::Channel channel;
        const auto r = proto::runSession(Variant::A, serverState, *devices[0], client.get(), channel);
        c.expect(r.confirmed, "session before revocation did not confirm");
    }
    client->revoke(ids[0]);
    client->revoke(ids[3]);
    const auto before = observe(*client, ids);

    client.reset();
    killHard(server);

    server = spawnRegistry(binary, log, toHex(ttpSeed));
    client = std::make_unique<reg::RegistryClient>("127.0.0.1", server.port);
    const auto after = observe(*client, ids);
    c.expect(before == after, "state after restart differs");
    c.expect(after.at(toHex(ids[0].bytes)) == "Revoked", "revocation lost");
    c.expect(after.at(toHex(ids[1].bytes)).rfind("ok ", 0) == 0, "certificate lost");

    reg::Registry replayed(curve::SigningKeyPair::fromSeed(ttpSeed).publicKey, log);
    c.expect(replayed.snapshot().size() == ids.size(), "in-process replay record count");

    net::Channel channel;
    const auto r = proto::runSession(Variant::A, serverState, *devices[0], client.get(), channel);
    c.expect(!r.confirmed && r.abortReason == proto::AbortReason::CertRevoked, "session against revoked ID did not abort with CertRevoked");

    client.reset();
    killHard(server);
    fs::remove_all(dir);

    if (c.ok)
        c.detail << ids.size() << " records, 2 revoked, identical after SIGKILL and restart; session aborted with CertRevoked";
}

const char* kNames[8] = {"",
                         "transfer/NVM table golden values (nominal sizes)",
                         "variant property matrix",
                         "crypto test vectors",
                         "end-to-end key agreement",
                         "fuzzy extractor reliability",
                         "attack suite",
                         "registry durability"};

} // namespace

int main(int argc, char** argv)
{
    if (argc != 2)
    {
        std::cerr << "usage: acceptance <pufkex-binary>\n";
        return 2;
    }
    const std::string binary = argv[1];

    const std::function<void(Check&)> criteria[8] = {
        nullptr,
        tableThree,
        tableTwo,
        cryptoVectors,
        endToEnd,
        extractorReliability,
        attackSuite,
        [&](Check& c) { registryDurability(c, binary); },
    };

    int failed = 0;
    for (int i = 1; i <= 7; ++i)
    {
        Check c;
        const auto start = std::chrono::steady_clock::now();
        try
        {
            criteria[i](c);
        }
        catch (const std::exception& e)
        {
            c.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (kLimitSeconds[i] > 0)
            c.expect(secs < kLimitSeconds[i], "over the " + std::to_string(kLimitSeconds[i]) + " s limit");

        std::printf("criterion %d: %s  %s (%s) [%.2f s]\n", i, c.ok ? "PASS" : "FAIL", kNames[i],
                    c.detail.str().c_str(), secs);
        std::fflush(stdout);
        failed += !c.ok;
    }
    return failed == 0 ? 0 : 1;
}
