#include "pufkex/accounting.hpp"
#include "pufkex/harness.hpp"

#include <doctest.h>

#include <numeric>

using namespace pufkex;
using namespace pufkex::acct;
using proto::Party;

namespace {

constexpr Variant kVariants[] = {Variant::A, Variant::B, Variant::C, Variant::D};

struct Golden
{
    std::size_t transfers[2];
    std::size_t bits[2];
    std::size_t total;
    std::size_t nvm;
};

// Golden values, one column per variant.
const std::map<Variant, Golden> kTable3 = {
    {Variant::A, {{4, 4}, {6576, 6736}, 13312, 256}},
    {Variant::B, {{4, 5}, {6832, 7296}, 14128, 6832}},
    {Variant::C, {{1, 4}, {6320, 6368}, 12688, 0}},
    {Variant::D, {{2, 5}, {6576, 6928}, 13504, 6576}},
};

std::size_t stageIndex(Stage s) { return s == Stage::Enrollment ? 0 : 1; }

} // namespace

TEST_CASE("nominal mode reproduces every transfer and size cell")
{
    const std::size_t totals[] = {8, 9, 5, 7};
    for (std::size_t i = 0; i < 4; ++i)
    {
        const auto v = kVariants[i];
        const auto& g = kTable3.at(v);
        CAPTURE(proto::variantChar(v));
        CHECK(transferCount(v, Stage::Enrollment) == g.transfers[0]);
        CHECK(transferCount(v, Stage::Session) == g.transfers[1]);
        CHECK(bitsTransferred(v, Stage::Enrollment) == g.bits[0]);
        CHECK(bitsTransferred(v, Stage::Session) == g.bits[1]);
        CHECK(nvmRequirement(v) == g.nvm);

        const auto c = column(v, Mode::Paper);
        CHECK(c.totalTransfers() == totals[i]);
        CHECK(c.totalBits() == g.total);
        CHECK(c.nvmBits == g.nvm);
    }
}

TEST_CASE("nominal sizes follow from the message schedule")
{
    for (auto v : kVariants)
    {
        CAPTURE(proto::variantChar(v));
        const auto t = proto::traits(v);
        std::size_t bits[2] = {}, device[2] = {}, handshakes = 0;
        for (const auto& m : schedule(v))
        {
            const auto i = stageIndex(m.stage);
            CHECK(m.from != m.to);
            if (m.stage == Stage::Session)
            {
                CHECK(m.from != Party::Ttp);
                CHECK(m.to != Party::Ttp);
            }
            if (m.from != Party::Device && m.to != Party::Device)
                continue;
            ++device[i];
            for (auto item : m.items)
                bits[i] += paperBits(item);
            handshakes += m.items.empty();
        }
        // The handshake is costed as one block, whatever its message count.
        CHECK(handshakes == (t.mutualAuth ? 3u : 2u));
        bits[1] += t.mutualAuth ? PaperConstants::handshakeMutualBits : PaperConstants::handshakeOneWayBits;
        CHECK(bits[0] == kTable3.at(v).bits[0]);
        CHECK(bits[1] == kTable3.at(v).bits[1]);
        CHECK(device[0] > 0);
        CHECK(device[1] > 0);
    }
}

TEST_CASE("item sizes")
{
    CHECK(paperBits(Item::Id) == 48);
    CHECK(paperBits(Item::PublicKey) == 256);
    CHECK(paperBits(Item::TtpPublicKey) == 256);
    CHECK(paperBits(Item::Signature) == 256);
    CHECK(paperBits(Item::HelperData) == 752 * 8);
    CHECK(paperBits(Item::DeviceCert) == 48 + 6016 + 256 + 256);
    CHECK(paperBits(Item::ServerCert) == 48 + 256 + 256);
    CHECK(paperBits(Item::Request) == 48);
}

TEST_CASE("measured mode sums an honest run's transfer log")
{
    for (auto v : kVariants)
    {
        CAPTURE(proto::variantChar(v));
        const auto& run = measuredRun(v);
        CHECK(&run == &measuredRun(v));

        std::size_t count[2] = {}, bits[2] = {};
        for (const auto& r : run.log)
        {
            ++count[stageIndex(r.stage)];
            if (r.involves(Party::Device))
                bits[stageIndex(r.stage)] += r.frameBits;
        }
        const auto c = column(v, Mode::Measured);
        CHECK(c.bits[0] == bits[0]);
        CHECK(c.bits[1] == bits[1]);
        CHECK(c.nvmBits == run.nvmBits);
        CHECK(c.transfers[0] == count[0]);
        CHECK(c.transfers[1] == count[1]);
        CHECK(sumDeviceBits(run.log, Stage::Session) == bits[1]);

        // Framing changes the sizes, never the number of messages.
        CHECK(c.transfers[1] == transferCount(v, Stage::Session, Mode::Paper));
        CHECK(c.transfers[0] == transferCount(v, Stage::Enrollment, Mode::Paper));
        CHECK(c.bits[1] > kTable3.at(v).bits[1]);
        CHECK((c.nvmBits == 0) == (v == Variant::C));
    }
}

TEST_CASE("measured mode agrees with an independent harness run")
{
    for (auto v : kVariants)
    {
        harness::Scenario s;
        s.variant = v;
        s.seed = 0x5eed;
        const auto o = harness::runScenario(s);
        REQUIRE(o.confirmed);
        CHECK(o.transferLog.size() == measuredRun(v).log.size());
        CHECK(sumDeviceBits(o.transferLog, Stage::Session) ==
              bitsTransferred(v, Stage::Session, Mode::Measured));
    }
}

TEST_CASE("log helpers over a hand-built log")
{
    using proto::MsgType;
    proto::TransferLog log = {
        {Stage::Enrollment, Party::Device, Party::Ttp, MsgType{}, 100, 140},
        {Stage::Enrollment, Party::Server, Party::Ttp, MsgType{}, 50, 90},
        {Stage::Session, Party::Server, Party::Device, MsgType{}, 10, 50},
        {Stage::Session, Party::Device, Party::Server, MsgType{}, 20, 60},
    };
    CHECK(countTransfers(log, Stage::Session) == 2);
    CHECK(countTransfers(log, Stage::Enrollment) == 2);
    CHECK(sumDeviceBits(log, Stage::Session) == 110);
    CHECK(sumDeviceBits(log, Stage::Enrollment) == 140);
    CHECK(sumDeviceBits({}, Stage::Session) == 0);
}

TEST_CASE("property matrix")
{
    using NC = NvmClass;
    using CM = CertManagement;
    const std::vector<PropertyRow> expected = {
        {Variant::A, true, true, NC::Negligible, true, CM::Online, true},
        {Variant::B, true, true, NC::Large, false, CM::Offline, true},
        {Variant::C, true, false, NC::None, true, CM::Online, false},
        {Variant::D, true, false, NC::Large, false, CM::Offline, false},
    };
    CHECK(propertyMatrix() == expected);
}

TEST_CASE("mode names")
{
    CHECK(parseMode("paper") == Mode::Paper);
    CHECK(parseMode("measured") == Mode::Measured);
    CHECK(modeName(Mode::Measured) == "measured");
    CHECK_THROWS_AS(parseMode("Paper"), Error);
}

TEST_CASE("tables")
{
    const auto t = formatTransferTable(Mode::Paper, {Variant::A, Variant::B, Variant::C, Variant::D});
    for (const char* cell : {"13312", "14128", "12688", "13504", "6736", "7296", "6368", "6928", "6832",
                             "Number of Transfers", "NVM Requirement (device)", "{Cert_ID} {PK_TTP}"})
    {
        CAPTURE(cell);
        CHECK(t.find(cell) != std::string::npos);
    }
    const auto single = formatTransferTable(Mode::Measured, {Variant::C});
    CHECK(single.find("Variant C") != std::string::npos);
    CHECK(single.find("Variant A") == std::string::npos);

    const auto p = formatPropertyTable();
    CHECK(p.find("negligible (+)") != std::string::npos);
    CHECK(p.find("none (++)") != std::string::npos);
    CHECK(p.find("offline (+/-)") != std::string::npos);
    CHECK(p.find(" \n") == std::string::npos);
}
