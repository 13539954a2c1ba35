#include "pufkex/error.hpp"
#include "pufkex/registry.hpp"
#include "pufkex/wire.hpp"
#include "support.hpp"

#include <doctest.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <thread>

using namespace pufkex;
using namespace pufkex::reg;
namespace fs = std::filesystem;

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

struct TempDir
{
    fs::path path;
    TempDir()
    {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("pufkex-registry-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

struct Certs
{
    curve::SigningKeyPair ttp = curve::SigningKeyPair::fromSeed(Bytes(32, 0x31));

    Bytes make(std::uint64_t device, std::uint8_t keyByte = 1) const
    {
        const auto id = id::DeviceId::fromSeed(device);
        const fe::HelperData hd{BitVector::fromBytes(Bytes(64, static_cast<std::uint8_t>(device)))};
        const auto pk = curve::x25519Base(Bytes(32, keyByte));
        return id::encodeTlv(id::issueDeviceCert(ttp, id, hd, pk));
    }
};

} // namespace

TEST_CASE("put, get, overwrite, revoke")
{
    Certs c;
    Registry r(c.ttp.publicKey);
    const auto cert = c.make(1);
    const auto id = id::DeviceId::fromSeed(1);

    CHECK(codeOf([&] { r.get(id); }) == ErrorCode::NotFound);
    r.put(cert);
    const auto rec = r.get(id);
    CHECK(rec.certBytes == cert);
    CHECK(rec.id == id);
    CHECK_FALSE(rec.revoked);

    const auto newer = c.make(1, 2);
    r.put(newer);
    CHECK(r.get(id).certBytes == newer);

    r.revoke(id);
    CHECK(codeOf([&] { r.get(id); }) == ErrorCode::Revoked);
    CHECK(r.snapshot().at(id).revoked);
    CHECK(codeOf([&] { r.revoke(id::DeviceId::fromSeed(2)); }) == ErrorCode::NotFound);

    // Re-enrollment replaces the revoked record.
    r.put(cert);
    CHECK(r.get(id).certBytes == cert);
}

TEST_CASE("put verifies the certificate")
{
    Certs c;
    Registry r(c.ttp.publicKey);
    auto cert = c.make(1);
    cert[20] ^= 1;
    CHECK(codeOf([&] { r.put(cert); }) == ErrorCode::CertInvalid);
    CHECK(codeOf([&] { r.put(testsupport::hex("0102")); }) == ErrorCode::CertInvalid);

    const auto foreign = curve::SigningKeyPair::fromSeed(Bytes(32, 0x99));
    Registry other(foreign.publicKey);
    CHECK(codeOf([&] { other.put(c.make(1)); }) == ErrorCode::CertInvalid);
    CHECK(other.snapshot().empty());
}

TEST_CASE("log replay restores the same state")
{
    TempDir dir;
    const auto log = dir.path / "registry.log";
    Certs c;
    std::map<id::DeviceId, RegistryRecord> before;
    {
        Registry r(c.ttp.publicKey, log);
        for (std::uint64_t d = 0; d < 10; ++d)
            r.put(c.make(d));
        r.put(c.make(3, 9));
        r.revoke(id::DeviceId::fromSeed(4));
        r.revoke(id::DeviceId::fromSeed(7));
        before = r.snapshot();
    }
    Registry again(c.ttp.publicKey, log);
    CHECK(again.snapshot() == before);
    CHECK(codeOf([&] { again.get(id::DeviceId::fromSeed(4)); }) == ErrorCode::Revoked);

    // The log is concatenated frames whose kind is the opcode.
    std::ifstream in(log, std::ios::binary);
    const Bytes raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t records = 0, pos = 0;
    while (pos < raw.size())
    {
        const auto len = wire::completeFrameLength(ByteView(raw).subspan(pos));
        REQUIRE(len);
        pos += *len;
        ++records;
    }
    CHECK(records == 13);
}

TEST_CASE("a torn final record is dropped and truncated")
{
    TempDir dir;
    const auto log = dir.path / "registry.log";
    Certs c;
    std::map<id::DeviceId, RegistryRecord> before;
    {
        Registry r(c.ttp.publicKey, log);
        r.put(c.make(1));
        r.put(c.make(2));
        before = r.snapshot();
    }
    const auto goodSize = fs::file_size(log);
    const auto torn = wire::encodeFrame(static_cast<std::uint8_t>(Opcode::Put), c.make(3));
    for (std::size_t cut : {std::size_t{1}, std::size_t{4}, std::size_t{5}, torn.size() - 1})
    {
        CAPTURE(cut);
        {
            std::ofstream out(log, std::ios::binary | std::ios::app);
            out.write(reinterpret_cast<const char*>(torn.data()), static_cast<std::streamsize>(cut));
        }
        Registry r(c.ttp.publicKey, log);
        CHECK(r.snapshot() == before);
        CHECK(fs::file_size(log) == goodSize);
    }
    {
        Registry r(c.ttp.publicKey, log);
        r.put(c.make(3));
        before = r.snapshot();
    }
    CHECK(Registry(c.ttp.publicKey, log).snapshot() == before);
}

TEST_CASE("damage inside the log is reported")
{
    TempDir dir;
    const auto log = dir.path / "registry.log";
    Certs c;
    {
        Registry r(c.ttp.publicKey, log);
        r.put(c.make(1));
        r.put(c.make(2));
    }
    {
        std::fstream f(log, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(40);
        char b = 0;
        f.read(&b, 1);
        f.seekp(40);
        b = static_cast<char>(b ^ 0x01);
        f.write(&b, 1);
    }
    CHECK(codeOf([&] { Registry r(c.ttp.publicKey, log); }) == ErrorCode::CorruptLog);
}

TEST_CASE("request handling over the wire format")
{
    Certs c;
    Registry r(c.ttp.publicKey);
    auto call = [&](Opcode op, ByteView body) {
        const auto resp = RegistryService::handle(r, wire::encodeFrame(static_cast<std::uint8_t>(op), body));
        const auto f = wire::decodeFrame(resp);
        return std::make_pair(static_cast<Status>(f.kind), Bytes(f.body.begin(), f.body.end()));
    };
    const auto cert = c.make(5);
    const auto id = id::DeviceId::fromSeed(5);

    CHECK(call(Opcode::Get, id.bytes).first == Status::NotFound);
    CHECK(call(Opcode::Put, cert).first == Status::Ok);
    CHECK(call(Opcode::Get, id.bytes) == std::make_pair(Status::Ok, cert));
    CHECK(call(Opcode::Revoke, id.bytes).first == Status::Ok);
    CHECK(call(Opcode::Get, id.bytes).first == Status::Revoked);
    CHECK(call(Opcode::Put, testsupport::hex("00")).first == Status::Invalid);
    CHECK(call(Opcode::Get, testsupport::hex("0102")).first == Status::Invalid);
    CHECK(call(static_cast<Opcode>(0x7e), {}).first == Status::Invalid);
    const auto garbage = RegistryService::handle(r, testsupport::hex("0000"));
    CHECK(garbage[4] == static_cast<std::uint8_t>(Status::Invalid));
}

TEST_CASE("TCP service and client")
{
    Certs c;
    Registry r(c.ttp.publicKey);
    RegistryService service(r, 0);
    REQUIRE(service.port() != 0);
    RegistryClient client("127.0.0.1", service.port());

    const auto id = id::DeviceId::fromSeed(8);
    CHECK(codeOf([&] { client.get(id); }) == ErrorCode::NotFound);
    client.put(c.make(8));
    CHECK(client.get(id).certBytes == c.make(8));
    auto bad = c.make(9);
    bad[30] ^= 4;
    CHECK(codeOf([&] { client.put(bad); }) == ErrorCode::CertInvalid);
    client.revoke(id);
    CHECK(codeOf([&] { client.get(id); }) == ErrorCode::Revoked);
    CHECK(codeOf([&] { client.revoke(id::DeviceId::fromSeed(99)); }) == ErrorCode::NotFound);
    CHECK(r.snapshot().at(id).revoked);
}

TEST_CASE("concurrent clients see only verified certificates")
{
    Certs c;
    Registry r(c.ttp.publicKey);
    RegistryService service(r, 0);
    std::vector<Bytes> certs;
    for (std::uint64_t d = 0; d < 8; ++d)
        certs.push_back(c.make(d));

    std::atomic<int> failures{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            RegistryClient client("127.0.0.1", service.port());
            for (int i = 0; i < 50; ++i)
            {
                const auto d = static_cast<std::uint64_t>((i + t) % 8);
                if (t == 0)
                    client.put(certs[d]);
                try
                {
                    const auto rec = client.get(id::DeviceId::fromSeed(d));
                    if (!id::verifyCert(rec.certBytes, c.ttp.publicKey))
                        ++failures;
                }
                catch (const Error& e)
                {
                    if (e.code() != ErrorCode::NotFound)
                        ++failures;
                }
            }
        });
    for (auto& th : threads)
        th.join();
    CHECK(failures == 0);
    CHECK(r.snapshot().size() == 8);
}

TEST_CASE("service stops cleanly with idle connections open")
{
    Certs c;
    Registry r(c.ttp.publicKey);
    auto service = std::make_unique<RegistryService>(r, 0);
    RegistryClient idle("127.0.0.1", service->port());
    CHECK(codeOf([&] { idle.get(id::DeviceId::fromSeed(1)); }) == ErrorCode::NotFound);
    service->stop();
    service.reset();
    CHECK(codeOf([&] { idle.get(id::DeviceId::fromSeed(1)); }) == ErrorCode::Io);
}

TEST_CASE("address parsing")
{
    CHECK(parseAddress("127.0.0.1:7000") == std::make_pair(std::string("127.0.0.1"), std::uint16_t{7000}));
    CHECK(parseAddress("localhost:1").second == 1);
    for (const char* bad : {"", "host", ":80", "host:", "host:0", "host:70000", "host:8x"})
    {
        CAPTURE(bad);
        CHECK(codeOf([&] { parseAddress(bad); }) == ErrorCode::InvalidArgument);
    }
}
