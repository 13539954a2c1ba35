#pragma once

#include "pufkex/protocol.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace pufkex::acct {

using proto::Stage;
using proto::Variant;

// Nominal field sizes in bits. The request and handshake sizes are the values
// that make every Stage II total agree with the nominal field sizes.
struct PaperConstants
{
    static constexpr std::size_t idBits = 48;
    static constexpr std::size_t keyBits = 256;
    static constexpr std::size_t sigBits = 256;
    static constexpr std::size_t hdBits = 6016; // 752 bytes
    static constexpr std::size_t deviceCertBits = idBits + hdBits + keyBits + sigBits;
    static constexpr std::size_t serverCertBits = idBits + keyBits + sigBits;
    static constexpr std::size_t sessionReqBits = 48;
    static constexpr std::size_t handshakeOneWayBits = 48;
    static constexpr std::size_t handshakeMutualBits = 112;
};

static_assert(PaperConstants::deviceCertBits == 6576);
static_assert(PaperConstants::serverCertBits == 560);

enum class Mode {
    Paper,    // nominal field sizes over the message schedule
    Measured, // framed bytes observed in an honest, seeded run
};

Mode parseMode(std::string_view text); // "paper" | "measured"
std::string_view modeName(Mode m);

enum class Item {
    Id,
    PublicKey,
    Signature,
    HelperData,
    DeviceCert,
    ServerCert,
    TtpPublicKey,
    Request,
};

std::size_t paperBits(Item item);

struct ScheduledMessage
{
    Stage stage;
    proto::Party from;
    proto::Party to;
    proto::MsgType type;
    std::vector<Item> items; // empty for handshake messages
};

// The honest message sequence of a variant, both stages, all parties.
std::vector<ScheduledMessage> schedule(Variant v);

std::size_t transferCount(Variant v, Stage stage, Mode mode = Mode::Paper);
std::size_t bitsTransferred(Variant v, Stage stage, Mode mode = Mode::Paper);
std::size_t nvmRequirement(Variant v, Mode mode = Mode::Paper);

// Transfer log and NVM size of one honest enrollment plus session.
struct MeasuredRun
{
    proto::TransferLog log;
    std::size_t nvmBits = 0;
};

// Deterministic (fixed seeds); cached per variant.
const MeasuredRun& measuredRun(Variant v);

// Pure functions over a log, so tests can feed their own.
std::size_t countTransfers(const proto::TransferLog& log, Stage stage);
std::size_t sumDeviceBits(const proto::TransferLog& log, Stage stage);

struct Column
{
    std::size_t transfers[2];
    std::size_t bits[2];
    std::size_t nvmBits;

    std::size_t totalTransfers() const { return transfers[0] + transfers[1]; }
    std::size_t totalBits() const { return bits[0] + bits[1]; }
    bool operator==(const Column&) const = default;
};

Column column(Variant v, Mode mode);

enum class NvmClass {
    None,
    Negligible,
    Large,
};

enum class CertManagement {
    Online,
    Offline,
};

struct PropertyRow
{
    Variant variant;
    bool deviceAuth;
    bool serverAuth;
    NvmClass nvm;
    bool cloudRequired;
    CertManagement certManagement;
    bool sigVerificationOnDevice;

    bool operator==(const PropertyRow&) const = default;
};

std::vector<PropertyRow> propertyMatrix();

// Aligned text tables: transfers/sizes/NVM per variant, and the property matrix.
std::string formatTransferTable(Mode mode, const std::vector<Variant>& variants);
std::string formatPropertyTable();

} // namespace pufkex::acct
