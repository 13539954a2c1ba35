#pragma once

#include "pufkex/bytes.hpp"
#include "pufkex/error.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace pufkex::wire {

// tag(1) || length(4, big-endian) || value
struct TlvRecord
{
    std::uint8_t tag = 0;
    Bytes value;

    bool operator==(const TlvRecord&) const = default;
};

using TlvRecords = std::vector<TlvRecord>;

// Records must already be in strictly ascending tag order (InvalidArgument otherwise).
Bytes encodeTlv(const TlvRecords& records);

// Rejects truncation, trailing bytes, duplicates and out-of-order tags by
// throwing Error(onError).
TlvRecords decodeTlv(ByteView bytes, ErrorCode onError);

const TlvRecord* findTlv(const TlvRecords& records, std::uint8_t tag);

// Frames are: be32 total length (including these 4 bytes) || kind || body.
constexpr std::size_t kFrameHeader = 5;
constexpr std::size_t kMaxFrameBytes = 1 << 20;

Bytes encodeFrame(std::uint8_t kind, ByteView body);

struct FrameView
{
    std::uint8_t kind = 0;
    ByteView body;
};

// Exactly one frame; throws Error(MalformedMessage) on any length inconsistency.
FrameView decodeFrame(ByteView frame);

// Length of the first complete frame in `buffer`, or nullopt if more bytes are
// needed. Throws MalformedMessage for an impossible length prefix.
std::optional<std::size_t> completeFrameLength(ByteView buffer);

} // namespace pufkex::wire
