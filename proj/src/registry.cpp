#include "pufkex/registry.hpp"
#include "pufkex/error.hpp"
#include "pufkex/wire.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>

namespace pufkex::reg {

namespace {

std::string sysError(const std::string& what)
{
    return what + ": " + std::strerror(errno);
}

RegistryRecord decodeRecordOrThrow(ByteView certTlv, const ByteArray<32>& pkTtp)
{
    id::DeviceCertificate cert;
    try
    {
        cert = id::decodeDeviceCert(certTlv);
    }
    catch (const Error& e)
    {
        throw Error(ErrorCode::CertInvalid, e.what());
    }
    if (!id::verifyCert(cert, pkTtp))
        throw Error(ErrorCode::CertInvalid, "certificate signature does not verify");
    return {cert.id, Bytes(certTlv.begin(), certTlv.end()), false};
}

id::DeviceId idFromBody(ByteView body)
{
    if (body.size() != 6)
        throw Error(ErrorCode::MalformedMessage, "device ID must be 6 bytes");
    id::DeviceId id;
    std::copy(body.begin(), body.end(), id.bytes.begin());
    return id;
}

bool readExact(int fd, std::uint8_t* out, std::size_t n, bool eofOk)
{
    std::size_t got = 0;
    while (got < n)
    {
        const auto r = ::read(fd, out + got, n - got);
        if (r < 0 && errno == EINTR)
            continue;
        if (r < 0)
            throw Error(ErrorCode::Io, sysError("read"));
        if (r == 0)
        {
            if (got == 0 && eofOk)
                return false;
            throw Error(ErrorCode::Io, "connection closed mid-frame");
        }
        got += static_cast<std::size_t>(r);
    }
    return true;
}

} // namespace

// --- Registry -------------------------------------------------------------

Registry::Registry(const ByteArray<32>& pkTtp, std::optional<std::filesystem::path> logPath)
    : pkTtp_(pkTtp), logPath_(std::move(logPath))
{
    if (!logPath_)
        return;
    replay();
    logFd_ = ::open(logPath_->c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (logFd_ < 0)
        throw Error(ErrorCode::Io, sysError("open " + logPath_->string()));
}

Registry::~Registry()
{
    if (logFd_ >= 0)
        ::close(logFd_);
}

void Registry::replay()
{
    std::ifstream in(*logPath_, std::ios::binary);
    if (!in)
        return;
    const Bytes log((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    std::size_t offset = 0;
    while (offset < log.size())
    {
        const ByteView rest(log.data() + offset, log.size() - offset);
        std::optional<std::size_t> len;
        try
        {
            len = wire::completeFrameLength(rest);
        }
        catch (const Error&)
        {
            throw Error(ErrorCode::CorruptLog,
                        "bad record length at offset " + std::to_string(offset));
        }
        if (!len)
            break; // torn write at the tail

        try
        {
            const auto frame = wire::decodeFrame(rest.first(*len));
            switch (static_cast<Opcode>(frame.kind))
            {
            case Opcode::Put: {
                auto rec = decodeRecordOrThrow(frame.body, pkTtp_);
                records_[rec.id] = std::move(rec);
                break;
            }
            case Opcode::Revoke: {
                auto it = records_.find(idFromBody(frame.body));
                if (it == records_.end())
                    throw Error(ErrorCode::CorruptLog, "revocation of an unknown device");
                it->second.revoked = true;
                break;
            }
            default:
                throw Error(ErrorCode::CorruptLog, "unknown opcode");
            }
        }
        catch (const Error& e)
        {
            throw Error(ErrorCode::CorruptLog, "record at offset " + std::to_string(offset) +
                                                   ": " + e.what());
        }
        offset += *len;
    }

    if (offset < log.size())
        std::filesystem::resize_file(*logPath_, offset);
}

void Registry::appendLog(Opcode op, ByteView body)
{
    if (logFd_ < 0)
        return;
    writeAll(logFd_, wire::encodeFrame(static_cast<std::uint8_t>(op), body));
    if (::fsync(logFd_) != 0)
        throw Error(ErrorCode::Io, sysError("fsync"));
}

RegistryRecord Registry::validated(ByteView certTlv) const
{
    return decodeRecordOrThrow(certTlv, pkTtp_);
}

void Registry::put(ByteView certTlv)
{
    auto rec = validated(certTlv);
    std::unique_lock lock(mutex_);
    appendLog(Opcode::Put, certTlv);
    records_[rec.id] = std::move(rec);
}

RegistryRecord Registry::get(const id::DeviceId& id)
{
    std::shared_lock lock(mutex_);
    const auto it = records_.find(id);
    if (it == records_.end())
        throw Error(ErrorCode::NotFound, "no certificate for " + id.hex());
    if (it->second.revoked)
        throw Error(ErrorCode::Revoked, "certificate for " + id.hex() + " is revoked");
    return it->second;
}

void Registry::revoke(const id::DeviceId& id)
{
    std::unique_lock lock(mutex_);
    const auto it = records_.find(id);
    if (it == records_.end())
        throw Error(ErrorCode::NotFound, "no certificate for " + id.hex());
    appendLog(Opcode::Revoke, id.bytes);
    it->second.revoked = true;
}

std::map<id::DeviceId, RegistryRecord> Registry::snapshot() const
{
    std::shared_lock lock(mutex_);
    return records_;
}

// --- service ----------------------------------------------------------------

Bytes RegistryService::handle(Registry& registry, ByteView requestFrame)
{
    auto reply = [](Status s, ByteView body = {}) {
        return wire::encodeFrame(static_cast<std::uint8_t>(s), body);
    };
    try
    {
        const auto req = wire::decodeFrame(requestFrame);
        switch (static_cast<Opcode>(req.kind))
        {
        case Opcode::Put:
            registry.put(req.body);
            return reply(Status::Ok);
        case Opcode::Get:
            return reply(Status::Ok, registry.get(idFromBody(req.body)).certBytes);
        case Opcode::Revoke:
            registry.revoke(idFromBody(req.body));
            return reply(Status::Ok);
        }
        return reply(Status::Invalid);
    }
    catch (const Error& e)
    {
        switch (e.code())
        {
        case ErrorCode::NotFound: return reply(Status::NotFound);
        case ErrorCode::Revoked: return reply(Status::Revoked);
        case ErrorCode::Io: throw;
        default: return reply(Status::Invalid);
        }
    }
}

RegistryService::RegistryService(Registry& registry, std::uint16_t port, std::string bindAddress)
    : registry_(registry)
{
    listenFd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listenFd_ < 0)
        throw Error(ErrorCode::Io, sysError("socket"));
    const int one = 1;
    ::setsockopt(listenFd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, bindAddress.c_str(), &addr.sin_addr) != 1)
    {
        ::close(listenFd_);
        throw Error(ErrorCode::InvalidArgument, "bad bind address " + bindAddress);
    }
    if (::bind(listenFd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(listenFd_, 64) != 0)
    {
        const auto msg = sysError("bind " + bindAddress + ":" + std::to_string(port));
        ::close(listenFd_);
        throw Error(ErrorCode::Io, msg);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listenFd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    acceptThread_ = std::thread([this] { acceptLoop(); });
}

RegistryService::~RegistryService()
{
    stop();
}

void RegistryService::stop()
{
    if (stopping_.exchange(true))
        return;
    ::shutdown(listenFd_, SHUT_RDWR);
    if (acceptThread_.joinable())
        acceptThread_.join();
    ::close(listenFd_);
    {
        std::lock_guard lock(connMutex_);
        for (int fd : connFds_)
            ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& w : workers_)
        if (w.joinable())
            w.join();
}

void RegistryService::acceptLoop()
{
    while (!stopping_)
    {
        const int fd = ::accept4(listenFd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0)
        {
            if (errno == EINTR || errno == ECONNABORTED)
                continue;
            break;
        }
        std::lock_guard lock(connMutex_);
        if (stopping_)
        {
            ::close(fd);
            break;
        }
        connFds_.push_back(fd);
        workers_.emplace_back([this, fd] { serveConnection(fd); });
    }
}

void RegistryService::serveConnection(int fd)
{
    try
    {
        while (auto frame = readFrame(fd))
            writeAll(fd, handle(registry_, *frame));
    }
    catch (const Error&)
    {
        // Malformed framing or a dropped peer ends this connection only.
    }
    std::lock_guard lock(connMutex_);
    std::erase(connFds_, fd);
    ::close(fd);
}

// --- client -----------------------------------------------------------------

RegistryClient::RegistryClient(std::string host, std::uint16_t port)
    : host_(std::move(host)), port_(port)
{
}

RegistryClient::~RegistryClient()
{
    if (fd_ >= 0)
        ::close(fd_);
}

void RegistryClient::connectIfNeeded()
{
    if (fd_ >= 0)
        return;
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const auto service = std::to_string(port_);
    if (const int rc = ::getaddrinfo(host_.c_str(), service.c_str(), &hints, &res); rc != 0)
        throw Error(ErrorCode::Io, "resolve " + host_ + ": " + ::gai_strerror(rc));

    for (auto* ai = res; ai != nullptr; ai = ai->ai_next)
    {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0)
            continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0)
        {
            fd_ = fd;
            break;
        }
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0)
        throw Error(ErrorCode::Io, "cannot connect to " + host_ + ":" + service);
}

std::pair<Status, Bytes> RegistryClient::call(Opcode op, ByteView body)
{
    connectIfNeeded();
    std::optional<Bytes> resp;
    try
    {
        writeAll(fd_, wire::encodeFrame(static_cast<std::uint8_t>(op), body));
        resp = readFrame(fd_);
        if (!resp)
            throw Error(ErrorCode::Io, "registry closed the connection");
    }
    catch (const Error&)
    {
        ::close(fd_);
        fd_ = -1;
        throw;
    }
    const auto frame = wire::decodeFrame(*resp);
    return {static_cast<Status>(frame.kind), Bytes(frame.body.begin(), frame.body.end())};
}

void RegistryClient::put(ByteView certTlv)
{
    const auto [status, body] = call(Opcode::Put, certTlv);
    if (status != Status::Ok)
        throw Error(ErrorCode::CertInvalid, "registry rejected the certificate");
}

RegistryRecord RegistryClient::get(const id::DeviceId& id)
{
    auto [status, body] = call(Opcode::Get, id.bytes);
    switch (status)
    {
    case Status::Ok: return {id, std::move(body), false};
    case Status::NotFound: throw Error(ErrorCode::NotFound, "no certificate for " + id.hex());
    case Status::Revoked:
        throw Error(ErrorCode::Revoked, "certificate for " + id.hex() + " is revoked");
    default: throw Error(ErrorCode::MalformedMessage, "registry rejected the request");
    }
}

void RegistryClient::revoke(const id::DeviceId& id)
{
    const auto [status, body] = call(Opcode::Revoke, id.bytes);
    if (status == Status::NotFound)
        throw Error(ErrorCode::NotFound, "no certificate for " + id.hex());
    if (status != Status::Ok)
        throw Error(ErrorCode::MalformedMessage, "registry rejected the request");
}

// --- helpers ----------------------------------------------------------------

std::pair<std::string, std::uint16_t> parseAddress(const std::string& address)
{
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == address.size())
        throw Error(ErrorCode::InvalidArgument, "expected host:port, got '" + address + "'");
    unsigned port = 0;
    const char* first = address.data() + colon + 1;
    const char* last = address.data() + address.size();
    const auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc{} || ptr != last || port == 0 || port > 65535)
        throw Error(ErrorCode::InvalidArgument, "bad port in '" + address + "'");
    return {address.substr(0, colon), static_cast<std::uint16_t>(port)};
}

void writeAll(int fd, ByteView data)
{
    std::size_t sent = 0;
    while (sent < data.size())
    {
        ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == ENOTSOCK)
            n = ::write(fd, data.data() + sent, data.size() - sent);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            throw Error(ErrorCode::Io, sysError("write"));
        sent += static_cast<std::size_t>(n);
    }
}

std::optional<Bytes> readFrame(int fd)
{
    Bytes frame(4);
    if (!readExact(fd, frame.data(), 4, true))
        return std::nullopt;
    const std::size_t total = loadBe32(frame.data());
    if (total < wire::kFrameHeader || total > wire::kMaxFrameBytes)
        throw Error(ErrorCode::Io, "bad frame length " + std::to_string(total));
    frame.resize(total);
    readExact(fd, frame.data() + 4, total - 4, false);
    return frame;
}

} // namespace pufkex::reg
