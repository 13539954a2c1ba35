#include "pufkex/transport.hpp"

namespace pufkex::net {

std::vector<Bytes> Channel::transmit(Direction dir, Bytes frame)
{
    WireEvent ev;
    ev.index = events_.size();
    ev.dir = dir;
    ev.delivered = interceptor_ ? interceptor_(ev.index, dir, frame) : std::vector<Bytes>{frame};
    ev.sent = std::move(frame);
    events_.push_back(ev);
    return ev.delivered;
}

Bytes Channel::recordedBytes() const
{
    Bytes out;
    for (const auto& ev : events_)
    {
        append(out, ev.sent);
        for (const auto& d : ev.delivered)
            append(out, d);
    }
    return out;
}

} // namespace pufkex::net
