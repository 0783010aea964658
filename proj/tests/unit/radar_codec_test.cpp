#include <gtest/gtest.h>

#include <random>

#include "cabin/core/errors.hpp"
#include "cabin/radar/codec.hpp"
#include "oracles.hpp"
#include "random_records.hpp"

using namespace cabin;
using namespace cabin::radar;

namespace {

std::vector<std::uint8_t> concat(const std::vector<RadarFrame>& frames) {
    std::vector<std::uint8_t> out;
    for (const auto& f : frames) {
        const auto b = encode_frame(f);
        out.insert(out.end(), b.begin(), b.end());
    }
    return out;
}

} // namespace

TEST(RadarCodec, ReferenceFrameBytes) {
    const RadarFrame f{1000, 72.0, 15.0, 800.0, false, true};
    const FrameBytes expected{0xAA, 0x55, 0x01, 0x0C, 0xE8, 0x03, 0x00, 0x00, 0xD0,
                              0x02, 0x96, 0x00, 0x20, 0x03, 0x02, 0x00, 0x85};
    EXPECT_EQ(encode_frame(f), expected);

    const auto o = oracle::radar_frame(1000, 720, 150, 800, false, true);
    EXPECT_TRUE(std::equal(o.begin(), o.end(), expected.begin()));
}

TEST(RadarCodec, AllZeroFrameChecksum) {
    const auto b = encode_frame(RadarFrame{});
    for (std::size_t i = 4; i < 16; ++i) EXPECT_EQ(b[i], 0) << i;
    EXPECT_EQ(b[16], 0x0D);
}

TEST(RadarCodec, RejectsUnrepresentableFields) {
    RadarFrame f;
    f.hr_bpm = 6553.6;
    EXPECT_THROW(encode_frame(f), ValidationError);
    f = RadarFrame{};
    f.distance_mm = 65536;
    EXPECT_THROW(encode_frame(f), ValidationError);
    f = RadarFrame{};
    f.distance_mm = 800.5;
    EXPECT_THROW(encode_frame(f), ValidationError);
}

TEST(RadarCodec, SplitFrameReassembles) {
    const auto b = encode_frame(RadarFrame{1000, 72.0, 15.0, 800.0, false, true});
    StreamDecoder d;
    EXPECT_TRUE(d.feed(std::span(b).first(5)).empty());
    const auto frames = d.feed(std::span(b).subspan(5));
    ASSERT_EQ(frames.size(), 1u);
    EXPECT_EQ(frames[0].hr_bpm, 72.0);
    EXPECT_EQ(d.carry_over(), 0u);
}

TEST(RadarCodec, FlippedPayloadByteLosesOnlyThatFrame) {
    const RadarFrame a{1000, 72.0, 15.0, 800.0, false, true};
    const RadarFrame b{2000, 71.5, 14.9, 801.0, true, true};
    auto bytes = concat({a, b});
    bytes[9] ^= 0x10;
    StreamDecoder d;
    const auto frames = d.feed(bytes);
    ASSERT_EQ(frames.size(), 1u);
    EXPECT_EQ(frames[0], b);
    EXPECT_EQ(d.counters().frames_bad_checksum, 1u);
}

TEST(RadarCodec, LeadingGarbageIsSkipped) {
    std::vector<std::uint8_t> bytes{0x00, 0x13, 0xAA, 0x00, 0x55, 0x7F, 0xFF};
    const std::vector<RadarFrame> frames{{1, 60.0, 12.0, 700, false, true},
                                         {2, 61.0, 12.5, 701, false, true},
                                         {3, 62.0, 13.0, 702, true, false}};
    const auto body = concat(frames);
    bytes.insert(bytes.end(), body.begin(), body.end());
    StreamDecoder d;
    EXPECT_EQ(d.feed(bytes), frames);
    EXPECT_EQ(d.counters().bytes_skipped, 7u);
    EXPECT_EQ(d.counters().frames_ok, 3u);
}

TEST(RadarCodec, CarryOverStaysBelowFrameSize) {
    testgen::Gen gen(5);
    std::vector<RadarFrame> frames;
    for (int i = 0; i < 50; ++i) frames.push_back(gen.radar());
    const auto bytes = concat(frames);
    StreamDecoder d;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(gen.integer(1, 40)), bytes.size() - pos);
        d.feed(std::span(bytes).subspan(pos, n));
        EXPECT_LT(d.carry_over(), kFrameSize);
        pos += n;
    }
}

TEST(RadarCodec, DecodeQuantizesToDeciUnits) {
    const auto b = encode_frame(RadarFrame{0, 72.04, 15.06, 10, false, false});
    StreamDecoder d;
    const auto f = d.feed(b);
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].hr_bpm, 72.0);
    EXPECT_EQ(f[0].rr_bpm, 15.1);
}

TEST(RadarCodec, ReferenceCodecSeam) {
    auto codec = make_reference_codec();
    const RadarFrame f{42, 70.0, 15.0, 800, false, true};
    const auto bytes = codec->encode(f);
    EXPECT_EQ(bytes.size(), kFrameSize);
    const auto out = codec->decode(bytes);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0], f);
    EXPECT_EQ(codec->counters().frames_ok, 1u);
}
