#pragma once

#include "pufkex/bytes.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace pufkex::net {

enum class Direction {
    ServerToDevice,
    DeviceToServer,
};

// Frames the adversary lets through in place of `frame`: empty drops it,
// one element passes/modifies it, more inject extra frames.
using Interceptor =
    std::function<std::vector<Bytes>(std::size_t index, Direction dir, const Bytes& frame)>;

struct WireEvent
{
    std::size_t index = 0;
    Direction dir = Direction::ServerToDevice;
    Bytes sent;
    std::vector<Bytes> delivered;
};

/// In-order duplex link between a server and a device.
///
/// Without an interceptor every frame is delivered once, unmodified. All
/// traffic is recorded, as seen by a passive observer.
class Channel
{
  public:
    Channel() = default;
    explicit Channel(Interceptor interceptor) : interceptor_(std::move(interceptor)) {}

    std::vector<Bytes> transmit(Direction dir, Bytes frame);

    const std::vector<WireEvent>& events() const { return events_; }

    // Everything sent and everything delivered, concatenated in order.
    Bytes recordedBytes() const;

  private:
    Interceptor interceptor_;
    std::vector<WireEvent> events_;
};

} // namespace pufkex::net
