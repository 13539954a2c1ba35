#include "pufkex/accounting.hpp"
#include "pufkex/error.hpp"
#include "pufkex/harness.hpp"

#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

namespace pufkex::acct {

namespace {

using proto::MsgType;
using proto::Party;

constexpr std::uint64_t kMeasuredSeed = 0x5eed;

std::size_t stageIndex(Stage s)
{
    return s == Stage::Enrollment ? 0 : 1;
}

std::size_t handshakeBits(Variant v)
{
    return proto::traits(v).mutualAuth ? PaperConstants::handshakeMutualBits
                                       : PaperConstants::handshakeOneWayBits;
}

std::string nvmLabel(NvmClass c)
{
    switch (c)
    {
    case NvmClass::None: return "none (++)";
    case NvmClass::Negligible: return "negligible (+)";
    case NvmClass::Large: return "large (--)";
    }
    return "?";
}

} // namespace

Mode parseMode(std::string_view text)
{
    if (text == "paper")
        return Mode::Paper;
    if (text == "measured")
        return Mode::Measured;
    throw Error(ErrorCode::InvalidArgument, "mode must be 'paper' or 'measured'");
}

std::string_view modeName(Mode m)
{
    return m == Mode::Paper ? "paper" : "measured";
}

std::size_t paperBits(Item item)
{
    switch (item)
    {
    case Item::Id: return PaperConstants::idBits;
    case Item::PublicKey: return PaperConstants::keyBits;
    case Item::Signature: return PaperConstants::sigBits;
    case Item::HelperData: return PaperConstants::hdBits;
    case Item::DeviceCert: return PaperConstants::deviceCertBits;
    case Item::ServerCert: return PaperConstants::serverCertBits;
    case Item::TtpPublicKey: return PaperConstants::keyBits;
    case Item::Request: return PaperConstants::sessionReqBits;
    }
    return 0;
}

std::vector<ScheduledMessage> schedule(Variant v)
{
    const auto t = proto::traits(v);
    std::vector<ScheduledMessage> out;

    // Stage I
    out.push_back({Stage::Enrollment, Party::Device, Party::Ttp, MsgType::EnrollReq,
                   {Item::Id, Item::HelperData, Item::PublicKey}});
    std::vector<Item> reply;
    if (t.deviceStoresCert)
        reply.push_back(Item::Signature);
    if (t.deviceStoresTtpKey)
        reply.push_back(Item::TtpPublicKey);
    if (!reply.empty())
        out.push_back({Stage::Enrollment, Party::Ttp, Party::Device, MsgType::EnrollResp, reply});
    if (t.mutualAuth)
    {
        out.push_back({Stage::Enrollment, Party::Server, Party::Ttp, MsgType::EnrollReq,
                       {Item::Id, Item::PublicKey}});
        out.push_back({Stage::Enrollment, Party::Ttp, Party::Server, MsgType::EnrollResp,
                       {Item::ServerCert, Item::TtpPublicKey}});
    }

    // Stage II
    std::vector<Item> req{Item::Request};
    if (t.usesCloud)
        req.push_back(Item::HelperData);
    if (t.mutualAuth)
        req.push_back(Item::ServerCert);
    out.push_back({Stage::Session, Party::Server, Party::Device, MsgType::SessionReq, req});
    if (t.deviceStoresCert)
        out.push_back({Stage::Session, Party::Device, Party::Server, MsgType::CertPush,
                       {Item::DeviceCert}});
    if (t.ephemeralServerKey)
        out.push_back({Stage::Session, Party::Server, Party::Device, MsgType::EphemeralPk,
                       {Item::PublicKey}});
    out.push_back({Stage::Session, Party::Server, Party::Device, MsgType::HsChallenge, {}});
    out.push_back({Stage::Session, Party::Device, Party::Server, MsgType::HsResponse, {}});
    if (t.mutualAuth)
        out.push_back({Stage::Session, Party::Server, Party::Device, MsgType::HsConfirm, {}});
    return out;
}

const MeasuredRun& measuredRun(Variant v)
{
    static std::mutex mutex;
    static std::map<Variant, MeasuredRun> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(v);
    if (it != cache.end())
        return it->second;

    harness::Scenario s;
    s.kind = harness::ScenarioKind::Honest;
    s.variant = v;
    s.seed = kMeasuredSeed;
    const auto outcome = harness::runScenario(s);
    if (!outcome.confirmed)
        throw Error(ErrorCode::InvalidState, "measured reference run did not confirm");

    MeasuredRun run;
    run.log = outcome.transferLog;
    run.nvmBits = outcome.deviceNvmBits;
    return cache.emplace(v, std::move(run)).first->second;
}

std::size_t countTransfers(const proto::TransferLog& log, Stage stage)
{
    std::size_t n = 0;
    for (const auto& r : log)
        n += r.stage == stage;
    return n;
}

std::size_t sumDeviceBits(const proto::TransferLog& log, Stage stage)
{
    std::size_t bits = 0;
    for (const auto& r : log)
        if (r.stage == stage && r.involves(Party::Device))
            bits += r.frameBits;
    return bits;
}

std::size_t transferCount(Variant v, Stage stage, Mode mode)
{
    if (mode == Mode::Measured)
        return countTransfers(measuredRun(v).log, stage);
    std::size_t n = 0;
    for (const auto& m : schedule(v))
        n += m.stage == stage;
    return n;
}

std::size_t bitsTransferred(Variant v, Stage stage, Mode mode)
{
    if (mode == Mode::Measured)
        return sumDeviceBits(measuredRun(v).log, stage);
    std::size_t bits = stage == Stage::Session ? handshakeBits(v) : 0;
    for (const auto& m : schedule(v))
        if (m.stage == stage && (m.from == Party::Device || m.to == Party::Device))
            for (auto item : m.items)
                bits += paperBits(item);
    return bits;
}

std::size_t nvmRequirement(Variant v, Mode mode)
{
    if (mode == Mode::Measured)
        return measuredRun(v).nvmBits;
    const auto t = proto::traits(v);
    return (t.deviceStoresCert ? PaperConstants::deviceCertBits : 0) +
           (t.deviceStoresTtpKey ? PaperConstants::keyBits : 0);
}

Column column(Variant v, Mode mode)
{
    Column c{};
    for (auto stage : {Stage::Enrollment, Stage::Session})
    {
        c.transfers[stageIndex(stage)] = transferCount(v, stage, mode);
        c.bits[stageIndex(stage)] = bitsTransferred(v, stage, mode);
    }
    c.nvmBits = nvmRequirement(v, mode);
    return c;
}

std::vector<PropertyRow> propertyMatrix()
{
    std::vector<PropertyRow> rows;
    for (auto v : proto::kAllVariants)
    {
        const auto t = proto::traits(v);
        const auto nvm = nvmRequirement(v, Mode::Paper);
        rows.push_back({v, true, t.mutualAuth,
                        nvm == 0 ? NvmClass::None
                                 : (nvm <= PaperConstants::keyBits ? NvmClass::Negligible
                                                                   : NvmClass::Large),
                        t.usesCloud,
                        t.usesCloud ? CertManagement::Online : CertManagement::Offline,
                        t.deviceStoresTtpKey});
    }
    return rows;
}

std::string formatTransferTable(Mode mode, const std::vector<Variant>& variants)
{
    std::vector<Column> cols;
    for (auto v : variants)
        cols.push_back(column(v, mode));

    constexpr int label = 28;
    constexpr int cell = 20;
    std::ostringstream out;
    auto row = [&](std::string_view name, auto value) {
        out << std::left << std::setw(label) << name;
        for (const auto& c : cols)
            out << std::right << std::setw(cell) << value(c);
        out << '\n';
    };
    auto heading = [&](std::string_view name) { out << name << '\n'; };

    out << std::left << std::setw(label) << ("mode: " + std::string(modeName(mode)));
    for (auto v : variants)
        out << std::right << std::setw(cell) << (std::string("Variant ") + proto::variantChar(v));
    out << '\n';

    heading("Number of Transfers");
    row("  Stage I", [](const Column& c) { return c.transfers[0]; });
    row("  Stage II", [](const Column& c) { return c.transfers[1]; });
    row("  Total", [](const Column& c) { return c.totalTransfers(); });
    heading("Data Transfer Size in bits (with device only)");
    row("  Stage I", [](const Column& c) { return c.bits[0]; });
    row("  Stage II", [](const Column& c) { return c.bits[1]; });
    row("  Total", [](const Column& c) { return c.totalBits(); });
    row("NVM Requirement (device)", [](const Column& c) { return c.nvmBits; });
    row("", [&](const Column& c) {
        const auto v = variants[static_cast<std::size_t>(&c - cols.data())];
        const auto t = proto::traits(v);
        std::string s;
        if (t.deviceStoresCert)
            s += "{Cert_ID}";
        if (t.deviceStoresTtpKey)
            s += s.empty() ? "{PK_TTP}" : " {PK_TTP}";
        return s.empty() ? std::string("-") : s;
    });
    return out.str();
}

std::string formatPropertyTable()
{
    const char* headers[] = {"Protocol", "Device Auth", "Server Auth", "NVM Requirement",
                             "Cloud", "Cert Management", "Sig. Verification on Device"};
    const int widths[] = {11, 13, 13, 17, 16, 17, 28};
    std::ostringstream out;
    auto cells = [&](const std::vector<std::string>& values) {
        std::ostringstream line;
        for (std::size_t i = 0; i < values.size(); ++i)
            line << std::left << std::setw(widths[i]) << values[i];
        auto text = line.str();
        text.erase(text.find_last_not_of(' ') + 1);
        out << text << '\n';
    };
    cells({std::begin(headers), std::end(headers)});
    for (const auto& r : propertyMatrix())
        cells({std::string("Variant ") + proto::variantChar(r.variant), r.deviceAuth ? "+" : "-",
               r.serverAuth ? "+" : "-", nvmLabel(r.nvm),
               r.cloudRequired ? "required (+/-)" : "",
               r.certManagement == CertManagement::Online ? "online (+)" : "offline (+/-)",
               r.sigVerificationOnDevice ? "required (--)" : ""});
    return out.str();
}

} // namespace pufkex::acct
