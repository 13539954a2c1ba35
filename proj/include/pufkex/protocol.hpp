#pragma once

#include "pufkex/bytes.hpp"
#include "pufkex/curve25519.hpp"
#include "pufkex/ed25519.hpp"
#include "pufkex/fuzzy_extractor.hpp"
#include "pufkex/identity.hpp"
#include "pufkex/puf.hpp"
#include "pufkex/registry.hpp"
#include "pufkex/symmetric.hpp"
#include "pufkex/transport.hpp"
#include "pufkex/wire.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace pufkex::proto {

enum class Variant : char {
    A = 'A', // mutual auth, certificates in the cloud
    B = 'B', // mutual auth, certificate on the device
    C = 'C', // device auth, cloud, ephemeral server key
    D = 'D', // device auth, certificate on the device, ephemeral server key
};

constexpr Variant kAllVariants[] = {Variant::A, Variant::B, Variant::C, Variant::D};

// Accepts "A".."D" (case-insensitive); throws InvalidArgument.
Variant parseVariant(std::string_view text);
inline char variantChar(Variant v) { return static_cast<char>(v); }

struct VariantTraits
{
    bool mutualAuth;         // server enrolled and authenticated; 3-message handshake
    bool usesCloud;          // device certificate lives in the registry
    bool deviceStoresCert;   // Cert_ID kept in device NVM and pushed upstream
    bool deviceStoresTtpKey; // PK_TTP kept in device NVM
    bool ephemeralServerKey; // fresh server DH key per session
};

VariantTraits traits(Variant v);

enum class MsgType : std::uint8_t {
    EnrollReq = 0x10,
    EnrollResp = 0x11,
    SessionReq = 0x20,
    CertPush = 0x21,
    EphemeralPk = 0x22,
    HsChallenge = 0x30,
    HsResponse = 0x31,
    HsConfirm = 0x32,
};

std::string_view msgTypeName(MsgType t);

// Payload TLV tags.
namespace field {
constexpr std::uint8_t Id = 0x01;
constexpr std::uint8_t HelperData = 0x02;
constexpr std::uint8_t PublicKey = 0x03;
constexpr std::uint8_t Signature = 0x04;
constexpr std::uint8_t DeviceCert = 0x10;
constexpr std::uint8_t ServerCert = 0x11;
constexpr std::uint8_t TtpPublicKey = 0x12;
constexpr std::uint8_t NonceServer = 0x20;
constexpr std::uint8_t NonceDevice = 0x21;
constexpr std::uint8_t Tag = 0x22;
constexpr std::uint8_t Debug = 0x7f;
} // namespace field

constexpr std::size_t kNonceBytes = 16;

struct ProtocolMessage
{
    MsgType type{};
    wire::TlvRecords fields; // ascending tag order

    Bytes encode() const;
    // Throws MalformedMessage on framing, TLV or unknown-type errors.
    static ProtocolMessage decode(ByteView frame);

    // Throws MalformedMessage unless the field set is exactly `tags`.
    void expectFields(std::initializer_list<std::uint8_t> tags) const;
    // Throws MalformedMessage if absent or (when expectedSize != 0) of another length.
    const Bytes& require(std::uint8_t tag, std::size_t expectedSize = 0) const;
};

enum class Party {
    Device,
    Server,
    Ttp,
};

std::string_view partyName(Party p);

enum class Stage {
    Enrollment = 1,
    Session = 2,
};

struct TransferRecord
{
    Stage stage{};
    Party from{};
    Party to{};
    MsgType type{};
    std::size_t payloadBits = 0; // TLV body
    std::size_t frameBits = 0;   // body plus 5-byte frame header

    bool involves(Party p) const { return from == p || to == p; }
};

using TransferLog = std::vector<TransferRecord>;

enum class AbortReason {
    CertInvalid,
    CertRevoked,
    CertNotFound,
    HandshakeMacMismatch,
    LowOrderResult,
    ReconstructFailed,
    MalformedMessage,
    UnexpectedMessage,
    IdentityMismatch,
    EphemeralSignatureInvalid,
};

std::string_view abortReasonName(AbortReason r);

using SessionKey = ByteArray<32>;

// --- roles ------------------------------------------------------------------

struct TtpState
{
    curve::SigningKeyPair keys;
    reg::CertStore* cloud = nullptr; // required for A and C

    static TtpState fromSeed(ByteView seed32, reg::CertStore* cloud = nullptr);
};

struct DeviceOptions
{
    fe::CodeParams code{};
    std::size_t entropyReadouts = 4;
    // Abort with ReconstructFailed on a decoding tie instead of carrying on
    // with the best-effort key (which then fails the handshake).
    bool strictReconstruct = false;
    // Test-only positive control: append k to HS_RESPONSE.
    bool leakSessionKeyForTesting = false;
};

// What the device keeps across power cycles.
struct DeviceNvm
{
    std::optional<ByteArray<32>> pkTtp;
    std::optional<Bytes> certTlv;

    std::size_t bits() const;
};

/// Everything the device owns: identity, PUF, non-volatile storage and the
/// PRNG seeded from PUF noise.
class DeviceState
{
  public:
    DeviceState(id::DeviceId id, puf::PufDevice puf, puf::NoiseModel noise,
                DeviceOptions options = {});

    const id::DeviceId& id() const { return id_; }
    const puf::PufDevice& puf() const { return puf_; }
    const puf::NoiseModel& noise() const { return noise_; }
    const DeviceOptions& options() const { return options_; }
    DeviceNvm& nvm() { return nvm_; }
    const DeviceNvm& nvm() const { return nvm_; }
    bool enrolled() const { return enrolled_; }
    std::optional<Variant> enrolledVariant() const { return variant_; }

    // Swap in different silicon; the NVM and enrollment flag stay.
    void replacePuf(puf::PufDevice puf) { puf_ = std::move(puf); }
    // Seeds the PRNG from external randomness instead of PUF noise.
    void seedRng(ByteView seed);

    puf::PufResponse freshReadout();
    // Lazily seeded from extractEntropySeed; throws InsufficientEntropy at p = 0.
    sym::DrbgState& rng();

    void markEnrolled(Variant v)
    {
        enrolled_ = true;
        variant_ = v;
    }

  private:
    id::DeviceId id_;
    puf::PufDevice puf_;
    puf::NoiseModel noise_;
    DeviceOptions options_;
    DeviceNvm nvm_;
    std::optional<sym::DrbgState> rng_;
    std::uint64_t readouts_ = 0;
    bool enrolled_ = false;
    std::optional<Variant> variant_;
};

struct ServerState
{
    id::DeviceId id;
    sym::DrbgState rng;
    std::optional<ByteArray<32>> pkTtp;
    std::optional<curve::AgreementKeyPair> staticKey;
    std::optional<id::ServerCertificate> cert;

    static ServerState create(id::DeviceId id, ByteView seed);
};

struct DeviceEnrollment
{
    id::DeviceCertificate cert;
    TransferLog log;
};

// Stage I for a device. Throws EnrollmentFailed (extractor/entropy errors) or
// InvalidState (already enrolled, missing cloud for A/C).
DeviceEnrollment enrollDevice(Variant variant, TtpState& ttp, DeviceState& dev);

struct ServerEnrollment
{
    id::ServerCertificate cert;
    TransferLog log;
};

// Stage I for the server; VariantMismatch for C and D.
ServerEnrollment enrollServer(Variant variant, TtpState& ttp, ServerState& server);

// k = HKDF(salt = sha256(transcript), ikm = w, info = "pufkex-v1" || variant).
// Throws LowOrderResult for an all-zero w.
SessionKey deriveSessionKey(ByteView w, Variant variant, ByteView transcript);

sym::Tag deviceConfirmTag(const SessionKey& k, ByteView nonceServer);
sym::Tag serverConfirmTag(const SessionKey& k, ByteView nonceDevice, ByteView nonceServer);

// Bytes covered by the ephemeral-key signature in upgrade mode.
Bytes ephemeralSignaturePreimage(const id::DeviceId& target, const curve::PublicKey& ephemeral);

enum class Phase {
    Idle,
    AwaitCert,
    AwaitEphemeral,
    AwaitChallenge,
    AwaitResponse,
    AwaitConfirm,
    Established,
    Aborted,
};

std::string_view phaseName(Phase p);

// Secrets exposed for audits; never put on the wire.
struct SessionSecrets
{
    std::optional<ByteArray<32>> rawSecret;     // S reconstructed from the PUF (device)
    std::optional<ByteArray<32>> clampedSecret; // x (device)
    std::optional<ByteArray<32>> sharedSecret;  // w
    std::optional<SessionKey> key;              // k
};

class DeviceSession
{
  public:
    DeviceSession(Variant variant, DeviceState& dev, bool ephemeralUpgrade = false);

    std::vector<Bytes> onFrame(ByteView frame);

    Phase phase() const { return phase_; }
    std::optional<AbortReason> abortReason() const { return reason_; }
    const SessionSecrets& secrets() const { return secrets_; }
    // Non-strict mode: number of RM blocks that decoded with a tie.
    std::size_t ambiguousBlocks() const { return ambiguousBlocks_; }

  private:
    std::vector<Bytes> handle(const ProtocolMessage& msg, ByteView frame);
    std::vector<Bytes> onSessionRequest(const ProtocolMessage& msg, ByteView frame);
    std::vector<Bytes> onEphemeral(const ProtocolMessage& msg, ByteView frame);
    std::vector<Bytes> onChallenge(const ProtocolMessage& msg);
    std::vector<Bytes> onConfirm(const ProtocolMessage& msg);
    bool reconstructSecret(const fe::HelperData& hd);
    void agree(ByteView peerPublic);
    std::vector<Bytes> abort(AbortReason r);

    Variant variant_;
    VariantTraits traits_;
    DeviceState& dev_;
    bool upgrade_;
    Phase phase_ = Phase::Idle;
    std::optional<AbortReason> reason_;
    Bytes transcript_;
    std::optional<id::ServerCertificate> serverCert_;
    SessionSecrets secrets_;
    Bytes nonceServer_;
    Bytes nonceDevice_;
    std::size_t ambiguousBlocks_ = 0;
};

class ServerSession
{
  public:
    ServerSession(Variant variant, ServerState& server, id::DeviceId target,
                  reg::CertStore* registry, bool ephemeralUpgrade = false);

    // Opening frames (SESSION_REQ and, where the server already can, the rest of its flight).
    std::vector<Bytes> start();
    std::vector<Bytes> onFrame(ByteView frame);

    Phase phase() const { return phase_; }
    std::optional<AbortReason> abortReason() const { return reason_; }
    const SessionSecrets& secrets() const { return secrets_; }

  private:
    std::vector<Bytes> onCertPush(const ProtocolMessage& msg, ByteView frame);
    std::vector<Bytes> onResponse(const ProtocolMessage& msg);
    // Sends EPHEMERAL_PK if needed, derives k and appends HS_CHALLENGE.
    void finishKeyAgreement(std::vector<Bytes>& out);
    std::optional<AbortReason> acceptDeviceCert(const id::DeviceCertificate& cert);
    std::vector<Bytes> abort(AbortReason r);
    Bytes send(const ProtocolMessage& msg, bool inTranscript);

    Variant variant_;
    VariantTraits traits_;
    ServerState& server_;
    id::DeviceId target_;
    reg::CertStore* registry_;
    bool upgrade_;
    Phase phase_ = Phase::Idle;
    std::optional<AbortReason> reason_;
    Bytes transcript_;
    std::optional<id::DeviceCertificate> deviceCert_;
    SessionSecrets secrets_;
    Bytes nonceServer_;
};

struct SessionResult
{
    bool confirmed = false;
    std::optional<AbortReason> abortReason; // first abort, in processing order
    std::optional<Party> abortedBy;
    Phase serverPhase = Phase::Idle;
    Phase devicePhase = Phase::Idle;
    SessionSecrets serverSecrets;
    SessionSecrets deviceSecrets;
    std::size_t deviceAmbiguousBlocks = 0;
    TransferLog log;

    bool keysMatch() const
    {
        return serverSecrets.key && deviceSecrets.key && *serverSecrets.key == *deviceSecrets.key;
    }
};

struct SessionOptions
{
    // A/B only: the server authenticates a fresh per-session DH key with its
    // certified static key, and the device verifies that signature.
    bool ephemeralUpgrade = false;
    std::size_t maxFrames = 64;
};

/// Stage II between `server` and `dev` over `channel`.
///
/// confirmed means every endpoint that checks a key-confirmation tag accepted
/// it and neither side aborted: the server in all variants, plus the device in
/// A and B.
SessionResult runSession(Variant variant, ServerState& server, DeviceState& dev,
                         reg::CertStore* registry, net::Channel& channel,
                         const SessionOptions& options = {});

} // namespace pufkex::proto
