#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cabin/core/model.hpp"

namespace cabin::radar {

// Frame layout, 17 bytes, little-endian:
//
//   0  0xAA            sync
//   1  0x55            sync
//   2  0x01            version
//   3  0x0C            payload length
//   4  device_ts  u32  ms since boot
//   8  hr         u16  deci-bpm
//  10  rr         u16  deci-breaths/min
//  12  distance   u16  mm
//  14  flags      u8   bit0 motion, bit1 presence
//  15  reserved   0x00
//  16  checksum   u8   sum of bytes 2..15 mod 256
inline constexpr std::size_t kFrameSize = 17;
inline constexpr std::uint8_t kSync0 = 0xAA;
inline constexpr std::uint8_t kSync1 = 0x55;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::uint8_t kPayloadLen = 0x0C;

/// A decoded radar frame. Same fields as the wire sample; HR and RR are
/// multiples of 0.1 after a decode.
using RadarFrame = RadarSample;

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

/// Throws ValidationError when a field does not fit the wire representation.
FrameBytes encode_frame(const RadarFrame& f);

std::uint8_t checksum(std::span<const std::uint8_t> version_through_reserved) noexcept;

struct DecoderCounters {
    std::uint64_t frames_ok = 0;
    std::uint64_t frames_bad_checksum = 0;
    std::uint64_t bytes_skipped = 0;

    bool operator==(const DecoderCounters&) const = default;
};

/// Incremental decoder for one serial source. Never throws on input bytes:
/// corruption is counted and the scanner moves forward one byte.
class StreamDecoder {
public:
    std::vector<RadarFrame> feed(std::span<const std::uint8_t> chunk);

    const DecoderCounters& counters() const noexcept { return counters_; }
    std::size_t carry_over() const noexcept { return buffer_.size(); }

private:
    std::vector<std::uint8_t> buffer_;
    DecoderCounters counters_;
};

/// Codec seam so a vendor byte format can replace the reference layout.
class FrameCodec {
public:
    virtual ~FrameCodec() = default;
    virtual std::vector<std::uint8_t> encode(const RadarFrame& f) const = 0;
    virtual std::vector<RadarFrame> decode(std::span<const std::uint8_t> chunk) = 0;
    virtual DecoderCounters counters() const = 0;
};

class ReferenceCodec final : public FrameCodec {
public:
    std::vector<std::uint8_t> encode(const RadarFrame& f) const override;
    std::vector<RadarFrame> decode(std::span<const std::uint8_t> chunk) override;
    DecoderCounters counters() const override { return decoder_.counters(); }

private:
    StreamDecoder decoder_;
};

std::unique_ptr<FrameCodec> make_reference_codec();

} // namespace cabin::radar
