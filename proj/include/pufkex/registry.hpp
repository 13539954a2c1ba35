#pragma once

#include "pufkex/bytes.hpp"
#include "pufkex/identity.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

namespace pufkex::reg {

struct RegistryRecord
{
    id::DeviceId id;
    Bytes certBytes; // TLV device certificate
    bool revoked = false;

    bool operator==(const RegistryRecord&) const = default;
};

// The "cloud": device certificates keyed by ID.
class CertStore
{
  public:
    virtual ~CertStore() = default;

    // Throws CertInvalid unless certTlv is a device certificate valid under the store's PK_TTP.
    virtual void put(ByteView certTlv) = 0;
    // Throws NotFound or Revoked.
    virtual RegistryRecord get(const id::DeviceId& id) = 0;
    // Throws NotFound.
    virtual void revoke(const id::DeviceId& id) = 0;
};

enum class Opcode : std::uint8_t {
    Put = 0x01,
    Get = 0x02,
    Revoke = 0x03,
};

enum class Status : std::uint8_t {
    Ok = 0x00,
    NotFound = 0x01,
    Revoked = 0x02,
    Invalid = 0x03,
};

/// In-process certificate registry with optional append-only log persistence.
///
/// Every successful put/revoke is appended to the log as a framed request
/// (same framing as the wire) and fsync'd before the call returns. On
/// construction the log is replayed; a torn trailing record is dropped and
/// truncated away. Mutations are serialized; reads take a shared lock.
class Registry : public CertStore
{
  public:
    explicit Registry(const ByteArray<32>& pkTtp,
                      std::optional<std::filesystem::path> logPath = std::nullopt);
    ~Registry() override;

    Registry(const Registry&) = delete;
    Registry& operator=(const Registry&) = delete;

    void put(ByteView certTlv) override;
    RegistryRecord get(const id::DeviceId& id) override;
    void revoke(const id::DeviceId& id) override;

    std::map<id::DeviceId, RegistryRecord> snapshot() const;
    const ByteArray<32>& pkTtp() const { return pkTtp_; }

  private:
    void replay();
    void appendLog(Opcode op, ByteView body);
    RegistryRecord validated(ByteView certTlv) const;

    ByteArray<32> pkTtp_;
    std::optional<std::filesystem::path> logPath_;
    int logFd_ = -1;
    mutable std::shared_mutex mutex_;
    std::map<id::DeviceId, RegistryRecord> records_;
};

// Serves a Registry over TCP: request frame kind = opcode, response frame kind = status.
class RegistryService
{
  public:
    // port 0 picks an ephemeral port; see port().
    RegistryService(Registry& registry, std::uint16_t port, std::string bindAddress = "127.0.0.1");
    ~RegistryService();

    RegistryService(const RegistryService&) = delete;
    RegistryService& operator=(const RegistryService&) = delete;

    std::uint16_t port() const { return port_; }
    void stop();

    // Processes one decoded request; exposed for tests.
    static Bytes handle(Registry& registry, ByteView requestFrame);

  private:
    void acceptLoop();
    void serveConnection(int fd);

    Registry& registry_;
    int listenFd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptThread_;
    std::mutex connMutex_;
    std::vector<int> connFds_;
    std::vector<std::thread> workers_;
};

// Synchronous client over one TCP connection.
class RegistryClient : public CertStore
{
  public:
    RegistryClient(std::string host, std::uint16_t port);
    ~RegistryClient() override;

    RegistryClient(const RegistryClient&) = delete;
    RegistryClient& operator=(const RegistryClient&) = delete;

    void put(ByteView certTlv) override;
    RegistryRecord get(const id::DeviceId& id) override;
    void revoke(const id::DeviceId& id) override;

  private:
    std::pair<Status, Bytes> call(Opcode op, ByteView body);
    void connectIfNeeded();

    std::string host_;
    std::uint16_t port_;
    int fd_ = -1;
};

// "host:port" -> pair; throws InvalidArgument.
std::pair<std::string, std::uint16_t> parseAddress(const std::string& address);

// Blocking helpers over a socket file descriptor; throw Io on failure/EOF.
void writeAll(int fd, ByteView data);
// Returns nullopt on clean EOF before the first byte.
std::optional<Bytes> readFrame(int fd);

} // namespace pufkex::reg
