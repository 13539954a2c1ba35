#include "pufkex/protocol.hpp"
#include "pufkex/error.hpp"

#include <algorithm>
#include <cctype>
#include <deque>

namespace pufkex::proto {

namespace {

const std::string_view kKdfInfo = "pufkex-v1";
const std::string_view kDeviceConfirmLabel = "dev-confirm";
const std::string_view kServerConfirmLabel = "srv-confirm";
const std::string_view kEphemeralLabel = "pufkex-ephemeral";
constexpr std::uint64_t kEntropyStream = 0xe4d7c0ffee5eedULL;

template <std::size_t N>
Bytes toBytes(const ByteArray<N>& a)
{
    return Bytes(a.begin(), a.end());
}

template <std::size_t N>
ByteArray<N> toArray(const Bytes& b)
{
    ByteArray<N> out{};
    std::copy_n(b.begin(), N, out.begin());
    return out;
}

bool isKnownType(std::uint8_t t)
{
    switch (static_cast<MsgType>(t))
    {
    case MsgType::EnrollReq:
    case MsgType::EnrollResp:
    case MsgType::SessionReq:
    case MsgType::CertPush:
    case MsgType::EphemeralPk:
    case MsgType::HsChallenge:
    case MsgType::HsResponse:
    case MsgType::HsConfirm:
        return true;
    }
    return false;
}

TransferRecord recordFrame(Stage stage, Party from, Party to, ByteView frame)
{
    TransferRecord r;
    r.stage = stage;
    r.from = from;
    r.to = to;
    r.type = frame.size() > 4 ? static_cast<MsgType>(frame[4]) : MsgType{};
    r.frameBits = frame.size() * 8;
    r.payloadBits = frame.size() >= wire::kFrameHeader ? (frame.size() - wire::kFrameHeader) * 8 : 0;
    return r;
}

std::optional<AbortReason> reasonFor(ErrorCode code)
{
    switch (code)
    {
    case ErrorCode::MalformedMessage: return AbortReason::MalformedMessage;
    case ErrorCode::MalformedCertificate: return AbortReason::CertInvalid;
    case ErrorCode::LowOrderResult: return AbortReason::LowOrderResult;
    case ErrorCode::ReconstructFailed: return AbortReason::ReconstructFailed;
    default: return std::nullopt;
    }
}

} // namespace

Variant parseVariant(std::string_view text)
{
    if (text.size() == 1)
    {
        switch (std::toupper(static_cast<unsigned char>(text[0])))
        {
        case 'A': return Variant::A;
        case 'B': return Variant::B;
        case 'C': return Variant::C;
        case 'D': return Variant::D;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "variant must be one of A, B, C, D");
}

VariantTraits traits(Variant v)
{
    switch (v)
    {
    case Variant::A: return {true, true, false, true, false};
    case Variant::B: return {true, false, true, true, false};
    case Variant::C: return {false, true, false, false, true};
    case Variant::D: return {false, false, true, false, true};
    }
    throw Error(ErrorCode::InvalidArgument, "unknown variant");
}

std::string_view msgTypeName(MsgType t)
{
    switch (t)
    {
    case MsgType::EnrollReq: return "ENROLL_REQ";
    case MsgType::EnrollResp: return "ENROLL_RESP";
    case MsgType::SessionReq: return "SESSION_REQ";
    case MsgType::CertPush: return "CERT_PUSH";
    case MsgType::EphemeralPk: return "EPHEMERAL_PK";
    case MsgType::HsChallenge: return "HS_CHALLENGE";
    case MsgType::HsResponse: return "HS_RESPONSE";
    case MsgType::HsConfirm: return "HS_CONFIRM";
    }
    return "UNKNOWN";
}

std::string_view partyName(Party p)
{
    switch (p)
    {
    case Party::Device: return "device";
    case Party::Server: return "server";
    case Party::Ttp: return "ttp";
    }
    return "?";
}

std::string_view abortReasonName(AbortReason r)
{
    switch (r)
    {
    case AbortReason::CertInvalid: return "CertInvalid";
    case AbortReason::CertRevoked: return "CertRevoked";
    case AbortReason::CertNotFound: return "CertNotFound";
    case AbortReason::HandshakeMacMismatch: return "HandshakeMacMismatch";
    case AbortReason::LowOrderResult: return "LowOrderResult";
    case AbortReason::ReconstructFailed: return "ReconstructFailed";
    case AbortReason::MalformedMessage: return "MalformedMessage";
    case AbortReason::UnexpectedMessage: return "UnexpectedMessage";
    case AbortReason::IdentityMismatch: return "IdentityMismatch";
    case AbortReason::EphemeralSignatureInvalid: return "EphemeralSignatureInvalid";
    }
    return "?";
}

std::string_view phaseName(Phase p)
{
    switch (p)
    {
    case Phase::Idle: return "IDLE";
    case Phase::AwaitCert: return "AWAIT_CERT";
    case Phase::AwaitEphemeral: return "AWAIT_EPHEMERAL";
    case Phase::AwaitChallenge: return "AWAIT_CHALLENGE";
    case Phase::AwaitResponse: return "AWAIT_RESPONSE";
    case Phase::AwaitConfirm: return "AWAIT_CONFIRM";
    case Phase::Established: return "ESTABLISHED";
    case Phase::Aborted: return "ABORTED";
    }
    return "?";
}

// --- messages ----------------------------------------------------------------

Bytes ProtocolMessage::encode() const
{
    return wire::encodeFrame(static_cast<std::uint8_t>(type), wire::encodeTlv(fields));
}

ProtocolMessage ProtocolMessage::decode(ByteView frame)
{
    const auto fv = wire::decodeFrame(frame);
    if (!isKnownType(fv.kind))
        throw Error(ErrorCode::MalformedMessage, "unknown message type " + std::to_string(fv.kind));
    return {static_cast<MsgType>(fv.kind), wire::decodeTlv(fv.body, ErrorCode::MalformedMessage)};
}

void ProtocolMessage::expectFields(std::initializer_list<std::uint8_t> tags) const
{
    std::vector<std::uint8_t> want(tags);
    std::sort(want.begin(), want.end());
    std::vector<std::uint8_t> have;
    for (const auto& f : fields)
        have.push_back(f.tag);
    if (want != have)
        throw Error(ErrorCode::MalformedMessage,
                    std::string("unexpected field set in ") + std::string(msgTypeName(type)));
}

const Bytes& ProtocolMessage::require(std::uint8_t tag, std::size_t expectedSize) const
{
    const auto* rec = wire::findTlv(fields, tag);
    if (rec == nullptr)
        throw Error(ErrorCode::MalformedMessage, "missing field " + std::to_string(tag));
    if (expectedSize != 0 && rec->value.size() != expectedSize)
        throw Error(ErrorCode::MalformedMessage, "field " + std::to_string(tag) +
                                                     " has wrong length " +
                                                     std::to_string(rec->value.size()));
    return rec->value;
}

// --- key schedule --------------------------------------------------------------

SessionKey deriveSessionKey(ByteView w, Variant variant, ByteView transcript)
{
    if (std::all_of(w.begin(), w.end(), [](std::uint8_t b) { return b == 0; }))
        throw Error(ErrorCode::LowOrderResult, "shared secret is all zero");
    Bytes info(kKdfInfo.begin(), kKdfInfo.end());
    info.push_back(static_cast<std::uint8_t>(variantChar(variant)));
    const auto salt = sym::sha256(transcript);
    return toArray<32>(sym::hkdf(salt, w, info, 32));
}

sym::Tag deviceConfirmTag(const SessionKey& k, ByteView nonceServer)
{
    Bytes msg(kDeviceConfirmLabel.begin(), kDeviceConfirmLabel.end());
    append(msg, nonceServer);
    return sym::hmacSha256(k, msg);
}

sym::Tag serverConfirmTag(const SessionKey& k, ByteView nonceDevice, ByteView nonceServer)
{
    Bytes msg(kServerConfirmLabel.begin(), kServerConfirmLabel.end());
    append(msg, nonceDevice);
    append(msg, nonceServer);
    return sym::hmacSha256(k, msg);
}

Bytes ephemeralSignaturePreimage(const id::DeviceId& target, const curve::PublicKey& ephemeral)
{
    Bytes out(kEphemeralLabel.begin(), kEphemeralLabel.end());
    out.insert(out.end(), target.bytes.begin(), target.bytes.end());
    out.insert(out.end(), ephemeral.begin(), ephemeral.end());
    return out;
}

// --- state -------------------------------------------------------------------

TtpState TtpState::fromSeed(ByteView seed32, reg::CertStore* cloud)
{
    return {curve::SigningKeyPair::fromSeed(seed32), cloud};
}

std::size_t DeviceNvm::bits() const
{
    return (pkTtp ? pkTtp->size() * 8 : 0) + (certTlv ? certTlv->size() * 8 : 0);
}

DeviceState::DeviceState(id::DeviceId id, puf::PufDevice puf, puf::NoiseModel noise,
                         DeviceOptions options)
    : id_(id), puf_(std::move(puf)), noise_(noise), options_(options)
{
    puf::validate(noise_);
    options_.code.validate();
    if (puf_.size() != options_.code.responseBits())
        throw Error(ErrorCode::SizeMismatch, "PUF size does not match the extractor code");
}

void DeviceState::seedRng(ByteView seed)
{
    rng_ = sym::DrbgState::fromSeed(seed);
}

puf::PufResponse DeviceState::freshReadout()
{
    return puf::readout(puf_, {noise_.flipProbability,
                               puf::deriveNoiseSeed(noise_.noiseSeed, readouts_++)});
}

sym::DrbgState& DeviceState::rng()
{
    if (!rng_)
    {
        const std::uint64_t base = puf::deriveNoiseSeed(noise_.noiseSeed ^ kEntropyStream, readouts_);
        readouts_ += options_.entropyReadouts;
        rng_ = sym::DrbgState::fromSeed(
            puf::extractEntropySeed(puf_, {noise_.flipProbability, base}, options_.entropyReadouts));
    }
    return *rng_;
}

ServerState ServerState::create(id::DeviceId id, ByteView seed)
{
    ServerState s;
    s.id = id;
    s.rng = sym::DrbgState::fromSeed(seed);
    return s;
}

// --- Stage I -------------------------------------------------------------------

DeviceEnrollment enrollDevice(Variant variant, TtpState& ttp, DeviceState& dev)
{
    if (dev.enrolled())
        throw Error(ErrorCode::InvalidState, "device " + dev.id().hex() + " is already enrolled");
    const auto t = traits(variant);
    if (t.usesCloud && ttp.cloud == nullptr)
        throw Error(ErrorCode::InvalidState, "variant requires a cloud registry");

    // Enrollment runs in a controlled environment against the stable reference pattern.
    fe::SecretKey secret;
    fe::HelperData hd;
    try
    {
        secret.bytes = sym::drawArray<32>(dev.rng());
        hd = fe::enroll(dev.puf().reference(), secret, dev.options().code);
    }
    catch (const Error& e)
    {
        throw Error(ErrorCode::EnrollmentFailed, e.what());
    }
    const auto keys = curve::AgreementKeyPair::fromSecret(secret.bytes);

    DeviceEnrollment result;
    const ProtocolMessage req{MsgType::EnrollReq,
                              {{field::Id, toBytes(dev.id().bytes)},
                               {field::HelperData, hd.bits.bytes()},
                               {field::PublicKey, toBytes(keys.publicKey)}}};
    const Bytes reqFrame = req.encode();
    result.log.push_back(recordFrame(Stage::Enrollment, Party::Device, Party::Ttp, reqFrame));

    // TTP
    const auto got = ProtocolMessage::decode(reqFrame);
    got.expectFields({field::Id, field::HelperData, field::PublicKey});
    const id::DeviceId claimed{toArray<6>(got.require(field::Id, 6))};
    const fe::HelperData claimedHd{BitVector::fromBytes(got.require(field::HelperData))};
    const auto claimedPk = toArray<32>(got.require(field::PublicKey, 32));
    result.cert = id::issueDeviceCert(ttp.keys, claimed, claimedHd, claimedPk);
    if (t.usesCloud)
        ttp.cloud->put(id::encodeTlv(result.cert));

    wire::TlvRecords reply;
    if (t.deviceStoresCert)
        reply.push_back({field::Signature, toBytes(result.cert.sig.bytes)});
    if (t.deviceStoresTtpKey)
        reply.push_back({field::TtpPublicKey, toBytes(ttp.keys.publicKey)});

    if (!reply.empty())
    {
        const Bytes respFrame = ProtocolMessage{MsgType::EnrollResp, reply}.encode();
        result.log.push_back(recordFrame(Stage::Enrollment, Party::Ttp, Party::Device, respFrame));

        // Device
        const auto resp = ProtocolMessage::decode(respFrame);
        if (t.deviceStoresTtpKey)
            dev.nvm().pkTtp = toArray<32>(resp.require(field::TtpPublicKey, 32));
        if (t.deviceStoresCert)
        {
            const curve::Signature sig{toArray<64>(resp.require(field::Signature, 64))};
            dev.nvm().certTlv = id::encodeTlv(id::DeviceCertificate{dev.id(), hd, keys.publicKey, sig});
        }
    }
    dev.markEnrolled(variant);
    return result;
}

ServerEnrollment enrollServer(Variant variant, TtpState& ttp, ServerState& server)
{
    if (!traits(variant).mutualAuth)
        throw Error(ErrorCode::VariantMismatch,
                    std::string("server enrollment is not part of variant ") + variantChar(variant));

    const auto keys = curve::AgreementKeyPair::fromSecret(sym::drawArray<32>(server.rng));
    ServerEnrollment result;

    const Bytes reqFrame = ProtocolMessage{MsgType::EnrollReq,
                                           {{field::Id, toBytes(server.id.bytes)},
                                            {field::PublicKey, toBytes(keys.publicKey)}}}
                               .encode();
    result.log.push_back(recordFrame(Stage::Enrollment, Party::Server, Party::Ttp, reqFrame));

    const auto got = ProtocolMessage::decode(reqFrame);
    got.expectFields({field::Id, field::PublicKey});
    result.cert = id::issueServerCert(ttp.keys, id::DeviceId{toArray<6>(got.require(field::Id, 6))},
                                      toArray<32>(got.require(field::PublicKey, 32)));

    const Bytes respFrame = ProtocolMessage{MsgType::EnrollResp,
                                            {{field::ServerCert, id::encodeTlv(result.cert)},
                                             {field::TtpPublicKey, toBytes(ttp.keys.publicKey)}}}
                                .encode();
    result.log.push_back(recordFrame(Stage::Enrollment, Party::Ttp, Party::Server, respFrame));

    const auto resp = ProtocolMessage::decode(respFrame);
    server.cert = id::decodeServerCert(resp.require(field::ServerCert));
    server.pkTtp = toArray<32>(resp.require(field::TtpPublicKey, 32));
    server.staticKey = keys;
    return result;
}

// --- device session -------------------------------------------------------------

DeviceSession::DeviceSession(Variant variant, DeviceState& dev, bool ephemeralUpgrade)
    : variant_(variant), traits_(traits(variant)), dev_(dev),
      upgrade_(ephemeralUpgrade && traits(variant).mutualAuth)
{
    if (!dev_.enrolled() || dev_.enrolledVariant() != variant)
        throw Error(ErrorCode::InvalidState, "device is not enrolled for this variant");
}

std::vector<Bytes> DeviceSession::abort(AbortReason r)
{
    phase_ = Phase::Aborted;
    reason_ = r;
    return {};
}

std::vector<Bytes> DeviceSession::onFrame(ByteView frame)
{
    if (phase_ == Phase::Aborted || phase_ == Phase::Established)
        return {};
    try
    {
        return handle(ProtocolMessage::decode(frame), frame);
    }
    catch (const Error& e)
    {
        if (auto r = reasonFor(e.code()))
            return abort(*r);
        throw;
    }
}

std::vector<Bytes> DeviceSession::handle(const ProtocolMessage& msg, ByteView frame)
{
    const auto expected = [&]() -> MsgType {
        switch (phase_)
        {
        case Phase::Idle: return MsgType::SessionReq;
        case Phase::AwaitEphemeral: return MsgType::EphemeralPk;
        case Phase::AwaitChallenge: return MsgType::HsChallenge;
        default: return MsgType::HsConfirm;
        }
    }();
    if (msg.type != expected)
        return abort(AbortReason::UnexpectedMessage);

    switch (phase_)
    {
    case Phase::Idle: return onSessionRequest(msg, frame);
    case Phase::AwaitEphemeral: return onEphemeral(msg, frame);
    case Phase::AwaitChallenge: return onChallenge(msg);
    default: return onConfirm(msg);
    }
}

std::vector<Bytes> DeviceSession::onSessionRequest(const ProtocolMessage& msg, ByteView frame)
{
    switch (variant_)
    {
    case Variant::A: msg.expectFields({field::Id, field::HelperData, field::ServerCert}); break;
    case Variant::B: msg.expectFields({field::Id, field::ServerCert}); break;
    case Variant::C: msg.expectFields({field::Id, field::HelperData}); break;
    case Variant::D: msg.expectFields({field::Id}); break;
    }
    if (!std::equal(dev_.id().bytes.begin(), dev_.id().bytes.end(),
                    msg.require(field::Id, 6).begin()))
        return abort(AbortReason::IdentityMismatch);

    if (traits_.mutualAuth)
    {
        if (!dev_.nvm().pkTtp)
            throw Error(ErrorCode::InvalidState, "device holds no PK_TTP");
        serverCert_ = id::decodeServerCert(msg.require(field::ServerCert));
        if (!id::verifyCert(*serverCert_, *dev_.nvm().pkTtp))
            return abort(AbortReason::CertInvalid);
    }
    append(transcript_, frame);

    fe::HelperData hd;
    if (traits_.deviceStoresCert)
        hd = id::decodeDeviceCert(*dev_.nvm().certTlv).hd;
    else
        hd.bits = BitVector::fromBytes(
            msg.require(field::HelperData, dev_.options().code.responseBits() / 8));
    if (!reconstructSecret(hd))
        return abort(AbortReason::ReconstructFailed);

    std::vector<Bytes> out;
    if (traits_.deviceStoresCert)
    {
        out.push_back(
            ProtocolMessage{MsgType::CertPush, {{field::DeviceCert, *dev_.nvm().certTlv}}}.encode());
        append(transcript_, out.back());
    }

    if (traits_.ephemeralServerKey || upgrade_)
        phase_ = Phase::AwaitEphemeral;
    else
    {
        agree(serverCert_->pk);
        phase_ = Phase::AwaitChallenge;
    }
    return out;
}

std::vector<Bytes> DeviceSession::onEphemeral(const ProtocolMessage& msg, ByteView frame)
{
    if (upgrade_)
        msg.expectFields({field::PublicKey, field::Signature});
    else
        msg.expectFields({field::PublicKey});
    const auto pk = toArray<32>(msg.require(field::PublicKey, 32));
    if (upgrade_)
    {
        const curve::Signature sig{toArray<64>(msg.require(field::Signature, 64))};
        if (!curve::xedVerify(serverCert_->pk, ephemeralSignaturePreimage(dev_.id(), pk), sig))
            return abort(AbortReason::EphemeralSignatureInvalid);
    }
    append(transcript_, frame);
    agree(pk);
    phase_ = Phase::AwaitChallenge;
    return {};
}

std::vector<Bytes> DeviceSession::onChallenge(const ProtocolMessage& msg)
{
    msg.expectFields({field::NonceServer});
    nonceServer_ = msg.require(field::NonceServer, kNonceBytes);
    const auto tag = deviceConfirmTag(*secrets_.key, nonceServer_);

    ProtocolMessage resp{MsgType::HsResponse, {}};
    if (traits_.mutualAuth)
    {
        nonceDevice_ = sym::drawBytes(dev_.rng(), kNonceBytes);
        resp.fields.push_back({field::NonceDevice, nonceDevice_});
    }
    resp.fields.push_back({field::Tag, toBytes(tag)});
    if (dev_.options().leakSessionKeyForTesting)
        resp.fields.push_back({field::Debug, toBytes(*secrets_.key)});

    phase_ = traits_.mutualAuth ? Phase::AwaitConfirm : Phase::Established;
    return {resp.encode()};
}

std::vector<Bytes> DeviceSession::onConfirm(const ProtocolMessage& msg)
{
    msg.expectFields({field::Tag});
    const auto expected = serverConfirmTag(*secrets_.key, nonceDevice_, nonceServer_);
    if (!constantTimeEqual(expected, msg.require(field::Tag, expected.size())))
        return abort(AbortReason::HandshakeMacMismatch);
    phase_ = Phase::Established;
    return {};
}

bool DeviceSession::reconstructSecret(const fe::HelperData& hd)
{
    const auto result = fe::reconstructDetailed(dev_.freshReadout(), hd, dev_.options().code);
    ambiguousBlocks_ = result.ambiguousBlocks;
    if (ambiguousBlocks_ != 0 && dev_.options().strictReconstruct)
        return false;
    secrets_.rawSecret = result.secret.bytes;
    secrets_.clampedSecret = curve::clampScalar(result.secret.bytes);
    return true;
}

void DeviceSession::agree(ByteView peerPublic)
{
    secrets_.sharedSecret = curve::x25519(*secrets_.clampedSecret, peerPublic);
    secrets_.key = deriveSessionKey(*secrets_.sharedSecret, variant_, transcript_);
}

// --- server session -------------------------------------------------------------

ServerSession::ServerSession(Variant variant, ServerState& server, id::DeviceId target,
                             reg::CertStore* registry, bool ephemeralUpgrade)
    : variant_(variant), traits_(traits(variant)), server_(server), target_(target),
      registry_(registry), upgrade_(ephemeralUpgrade && traits(variant).mutualAuth)
{
    if (!server_.pkTtp)
        throw Error(ErrorCode::InvalidState, "server holds no PK_TTP");
    if (traits_.mutualAuth && (!server_.staticKey || !server_.cert))
        throw Error(ErrorCode::InvalidState, "server is not enrolled");
    if (traits_.usesCloud && registry_ == nullptr)
        throw Error(ErrorCode::InvalidState, "variant requires a registry");
}

std::vector<Bytes> ServerSession::abort(AbortReason r)
{
    phase_ = Phase::Aborted;
    reason_ = r;
    return {};
}

Bytes ServerSession::send(const ProtocolMessage& msg, bool inTranscript)
{
    Bytes frame = msg.encode();
    if (inTranscript)
        append(transcript_, frame);
    return frame;
}

std::optional<AbortReason> ServerSession::acceptDeviceCert(const id::DeviceCertificate& cert)
{
    if (!id::verifyCert(cert, *server_.pkTtp))
        return AbortReason::CertInvalid;
    if (cert.id != target_)
        return AbortReason::IdentityMismatch;
    deviceCert_ = cert;
    return std::nullopt;
}

std::vector<Bytes> ServerSession::start()
{
    if (phase_ != Phase::Idle)
        throw Error(ErrorCode::InvalidState, "session already started");
    try
    {
        if (traits_.usesCloud)
        {
            reg::RegistryRecord record;
            try
            {
                record = registry_->get(target_);
            }
            catch (const Error& e)
            {
                if (e.code() == ErrorCode::NotFound)
                    return abort(AbortReason::CertNotFound);
                if (e.code() == ErrorCode::Revoked)
                    return abort(AbortReason::CertRevoked);
                throw;
            }
            if (auto r = acceptDeviceCert(id::decodeDeviceCert(record.certBytes)))
                return abort(*r);
        }

        ProtocolMessage req{MsgType::SessionReq, {{field::Id, toBytes(target_.bytes)}}};
        if (variant_ == Variant::A || variant_ == Variant::C)
            req.fields.push_back({field::HelperData, deviceCert_->hd.bits.bytes()});
        if (traits_.mutualAuth)
            req.fields.push_back({field::ServerCert, id::encodeTlv(*server_.cert)});

        std::vector<Bytes> out{send(req, true)};
        if (traits_.deviceStoresCert)
        {
            phase_ = Phase::AwaitCert;
            return out;
        }
        finishKeyAgreement(out);
        return out;
    }
    catch (const Error& e)
    {
        if (auto r = reasonFor(e.code()))
            return abort(*r);
        throw;
    }
}

void ServerSession::finishKeyAgreement(std::vector<Bytes>& out)
{
    curve::Scalar secret{};
    if (traits_.ephemeralServerKey || upgrade_)
    {
        const auto eph = curve::AgreementKeyPair::fromSecret(sym::drawArray<32>(server_.rng));
        ProtocolMessage msg{MsgType::EphemeralPk, {{field::PublicKey, toBytes(eph.publicKey)}}};
        if (upgrade_)
        {
            const auto sig = curve::xedSign(server_.staticKey->secret,
                                            ephemeralSignaturePreimage(target_, eph.publicKey),
                                            sym::drawBytes(server_.rng, 64));
            msg.fields.push_back({field::Signature, toBytes(sig.bytes)});
            std::sort(msg.fields.begin(), msg.fields.end(),
                      [](const auto& a, const auto& b) { return a.tag < b.tag; });
        }
        out.push_back(send(msg, true));
        secret = eph.secret;
    }
    else
        secret = server_.staticKey->secret;

    secrets_.sharedSecret = curve::x25519(secret, deviceCert_->pk);
    secrets_.key = deriveSessionKey(*secrets_.sharedSecret, variant_, transcript_);

    nonceServer_ = sym::drawBytes(server_.rng, kNonceBytes);
    out.push_back(send({MsgType::HsChallenge, {{field::NonceServer, nonceServer_}}}, false));
    phase_ = Phase::AwaitResponse;
}

std::vector<Bytes> ServerSession::onFrame(ByteView frame)
{
    if (phase_ == Phase::Aborted || phase_ == Phase::Established || phase_ == Phase::Idle)
        return {};
    try
    {
        const auto msg = ProtocolMessage::decode(frame);
        if (phase_ == Phase::AwaitCert && msg.type == MsgType::CertPush)
            return onCertPush(msg, frame);
        if (phase_ == Phase::AwaitResponse && msg.type == MsgType::HsResponse)
            return onResponse(msg);
        return abort(AbortReason::UnexpectedMessage);
    }
    catch (const Error& e)
    {
        if (auto r = reasonFor(e.code()))
            return abort(*r);
        throw;
    }
}

std::vector<Bytes> ServerSession::onCertPush(const ProtocolMessage& msg, ByteView frame)
{
    msg.expectFields({field::DeviceCert});
    if (auto r = acceptDeviceCert(id::decodeDeviceCert(msg.require(field::DeviceCert))))
        return abort(*r);
    append(transcript_, frame);
    std::vector<Bytes> out;
    finishKeyAgreement(out);
    return out;
}

std::vector<Bytes> ServerSession::onResponse(const ProtocolMessage& msg)
{
    if (traits_.mutualAuth)
        msg.expectFields({field::NonceDevice, field::Tag});
    else
        msg.expectFields({field::Tag});

    const auto expected = deviceConfirmTag(*secrets_.key, nonceServer_);
    if (!constantTimeEqual(expected, msg.require(field::Tag, expected.size())))
        return abort(AbortReason::HandshakeMacMismatch);

    phase_ = Phase::Established;
    if (!traits_.mutualAuth)
        return {};
    const auto& nonceDevice = msg.require(field::NonceDevice, kNonceBytes);
    const auto confirm = serverConfirmTag(*secrets_.key, nonceDevice, nonceServer_);
    return {send({MsgType::HsConfirm, {{field::Tag, toBytes(confirm)}}}, false)};
}

// --- driver ---------------------------------------------------------------------

SessionResult runSession(Variant variant, ServerState& server, DeviceState& dev,
                         reg::CertStore* registry, net::Channel& channel,
                         const SessionOptions& options)
{
    ServerSession srv(variant, server, dev.id(), registry, options.ephemeralUpgrade);
    DeviceSession device(variant, dev, options.ephemeralUpgrade);
    SessionResult result;

    auto noteAbort = [&](Party who, std::optional<AbortReason> r) {
        if (r && !result.abortReason)
        {
            result.abortReason = r;
            result.abortedBy = who;
        }
    };

    std::deque<std::pair<net::Direction, Bytes>> queue;
    for (auto& f : srv.start())
        queue.emplace_back(net::Direction::ServerToDevice, std::move(f));
    noteAbort(Party::Server, srv.abortReason());

    std::size_t frames = 0;
    while (!queue.empty() && frames++ < options.maxFrames)
    {
        auto [dir, frame] = std::move(queue.front());
        queue.pop_front();
        const bool down = dir == net::Direction::ServerToDevice;
        result.log.push_back(recordFrame(Stage::Session, down ? Party::Server : Party::Device,
                                         down ? Party::Device : Party::Server, frame));

        for (const auto& delivered : channel.transmit(dir, std::move(frame)))
        {
            if (down)
            {
                for (auto& o : device.onFrame(delivered))
                    queue.emplace_back(net::Direction::DeviceToServer, std::move(o));
                noteAbort(Party::Device, device.abortReason());
            }
            else
            {
                for (auto& o : srv.onFrame(delivered))
                    queue.emplace_back(net::Direction::ServerToDevice, std::move(o));
                noteAbort(Party::Server, srv.abortReason());
            }
        }
    }

    result.serverPhase = srv.phase();
    result.devicePhase = device.phase();
    result.serverSecrets = srv.secrets();
    result.deviceSecrets = device.secrets();
    result.deviceAmbiguousBlocks = device.ambiguousBlocks();
    result.confirmed = !result.abortReason && srv.phase() == Phase::Established &&
                       (!traits(variant).mutualAuth || device.phase() == Phase::Established);
    return result;
}

} // namespace pufkex::proto
