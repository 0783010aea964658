#include "cabin/radar/codec.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "cabin/core/errors.hpp"

namespace cabin::radar {

namespace {

std::uint16_t to_deci(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError(std::string(name) + " must be a finite non-negative value");
    const double deci = std::round(v * 10.0);
    if (deci > 65535.0) throw ValidationError(std::string(name) + " does not fit u16 deci-units");
    return static_cast<std::uint16_t>(deci);
}

void put_u16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v & 0xFF);
    p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace

std::uint8_t checksum(std::span<const std::uint8_t> bytes) noexcept {
    unsigned sum = std::accumulate(bytes.begin(), bytes.end(), 0u);
    return static_cast<std::uint8_t>(sum & 0xFF);
}

FrameBytes encode_frame(const RadarFrame& f) {
    const std::uint16_t hr = to_deci(f.hr_bpm, "hr_bpm");
    const std::uint16_t rr = to_deci(f.rr_bpm, "rr_bpm");
    if (!std::isfinite(f.distance_mm) || f.distance_mm < 0.0 || f.distance_mm > 65535.0 ||
        f.distance_mm != std::floor(f.distance_mm)) {
        throw ValidationError("distance_mm must be an integer in [0, 65535]");
    }

    FrameBytes b{};
    b[0] = kSync0;
    b[1] = kSync1;
    b[2] = kVersion;
    b[3] = kPayloadLen;
    put_u32(&b[4], f.device_ts);
    put_u16(&b[8], hr);
    put_u16(&b[10], rr);
    put_u16(&b[12], static_cast<std::uint16_t>(f.distance_mm));
    b[14] = static_cast<std::uint8_t>((f.motion ? 0x01 : 0x00) | (f.presence ? 0x02 : 0x00));
    b[15] = 0x00;
    b[16] = checksum(std::span<const std::uint8_t>(b.data() + 2, 14));
    return b;
}

std::vector<RadarFrame> StreamDecoder::feed(std::span<const std::uint8_t> chunk) {
    buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
    std::vector<RadarFrame> out;

    std::size_t pos = 0;
    while (buffer_.size() - pos >= kFrameSize) {
        const std::uint8_t* p = buffer_.data() + pos;
        if (p[0] != kSync0 || p[1] != kSync1) {
            ++pos;
            ++counters_.bytes_skipped;
            continue;
        }
        if (p[2] != kVersion || p[3] != kPayloadLen ||
            checksum(std::span<const std::uint8_t>(p + 2, 14)) != p[16]) {
            // A sync pair followed by a bad header or checksum: count it once
            // as a bad frame and rescan from the next byte.
            ++counters_.frames_bad_checksum;
            ++pos;
            continue;
        }
        RadarFrame f;
        f.device_ts = get_u32(p + 4);
        f.hr_bpm = get_u16(p + 8) / 10.0;
        f.rr_bpm = get_u16(p + 10) / 10.0;
        f.distance_mm = get_u16(p + 12);
        f.motion = (p[14] & 0x01) != 0;
        f.presence = (p[14] & 0x02) != 0;
        out.push_back(f);
        ++counters_.frames_ok;
        pos += kFrameSize;
    }

    // Keep only the tail that could still start a frame.
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
    return out;
}

std::vector<std::uint8_t> ReferenceCodec::encode(const RadarFrame& f) const {
    auto b = encode_frame(f);
    return {b.begin(), b.end()};
}

std::vector<RadarFrame> ReferenceCodec::decode(std::span<const std::uint8_t> chunk) {
    return decoder_.feed(chunk);
}

std::unique_ptr<FrameCodec> make_reference_codec() { return std::make_unique<ReferenceCodec>(); }

} // namespace cabin::radar
