#include "pufkex/wire.hpp"

namespace pufkex::wire {

Bytes encodeTlv(const TlvRecords& records)
{
    Bytes out;
    int previous = -1;
    for (const auto& r : records)
    {
        if (static_cast<int>(r.tag) <= previous)
            throw Error(ErrorCode::InvalidArgument, "TLV records must be in ascending tag order");
        previous = r.tag;
        out.push_back(r.tag);
        appendBe32(out, static_cast<std::uint32_t>(r.value.size()));
        append(out, r.value);
    }
    return out;
}

TlvRecords decodeTlv(ByteView bytes, ErrorCode onError)
{
    TlvRecords out;
    std::size_t pos = 0;
    int previous = -1;
    while (pos < bytes.size())
    {
        if (bytes.size() - pos < 5)
            throw Error(onError, "truncated TLV header");
        const std::uint8_t tag = bytes[pos];
        const std::uint32_t len = loadBe32(bytes.data() + pos + 1);
        pos += 5;
        if (len > bytes.size() - pos)
            throw Error(onError, "TLV value overruns buffer");
        if (static_cast<int>(tag) == previous)
            throw Error(onError, "duplicate TLV tag " + std::to_string(tag));
        if (static_cast<int>(tag) < previous)
            throw Error(onError, "TLV records out of canonical order");
        previous = tag;
        out.push_back({tag, Bytes(bytes.begin() + static_cast<long>(pos),
                                  bytes.begin() + static_cast<long>(pos + len))});
        pos += len;
    }
    return out;
}

const TlvRecord* findTlv(const TlvRecords& records, std::uint8_t tag)
{
    for (const auto& r : records)
    {
        if (r.tag == tag)
            return &r;
    }
    return nullptr;
}

Bytes encodeFrame(std::uint8_t kind, ByteView body)
{
    if (body.size() + kFrameHeader > kMaxFrameBytes)
        throw Error(ErrorCode::LengthExceeded, "frame too large");
    Bytes out;
    out.reserve(body.size() + kFrameHeader);
    appendBe32(out, static_cast<std::uint32_t>(body.size() + kFrameHeader));
    out.push_back(kind);
    append(out, body);
    return out;
}

FrameView decodeFrame(ByteView frame)
{
    if (frame.size() < kFrameHeader)
        throw Error(ErrorCode::MalformedMessage, "frame shorter than header");
    if (loadBe32(frame.data()) != frame.size())
        throw Error(ErrorCode::MalformedMessage, "frame length prefix mismatch");
    return {frame[4], frame.subspan(kFrameHeader)};
}

std::optional<std::size_t> completeFrameLength(ByteView buffer)
{
    if (buffer.size() < 4)
        return std::nullopt;
    const std::uint32_t len = loadBe32(buffer.data());
    if (len < kFrameHeader || len > kMaxFrameBytes)
        throw Error(ErrorCode::MalformedMessage, "bad frame length " + std::to_string(len));
    if (buffer.size() < len)
        return std::nullopt;
    return len;
}

} // namespace pufkex::wire
