#include <gtest/gtest.h>

#include "cabin/core/errors.hpp"
#include "cabin/core/wire.hpp"
#include "random_records.hpp"

using namespace cabin;

namespace {

TimedRecord annotation_record(Annotation a) {
    TimedRecord r;
    r.session_id = "s01";
    r.source = Source::annotation;
    r.seq = 3;
    r.device_ts_ms = a.ts_ms;
    r.wall_ts_ms = a.ts_ms;
    r.payload = std::move(a);
    return r;
}

} // namespace

TEST(Wire, KssAnnotationEncodesKindAndValue) {
    const auto text = encode_record(annotation_record(make_kss(1'700'000'000'000, 7)));
    EXPECT_NE(text.find(R"("kind":"kss")"), std::string::npos);
    EXPECT_NE(text.find(R"("value":7)"), std::string::npos);
    EXPECT_EQ(text.find("null"), std::string::npos);
}

TEST(Wire, UnwornWearableOmitsHeartRate) {
    TimedRecord r;
    r.session_id = "s01";
    r.source = Source::wearable;
    WearableSample w;
    w.device_ts = 5;
    w.worn = false;
    w.rr_bpm = 14.0;
    r.payload = w;
    const auto text = encode_record(r);
    EXPECT_NE(text.find(R"("worn":false)"), std::string::npos);
    EXPECT_EQ(text.find("hr_bpm"), std::string::npos);
}

TEST(Wire, RandomizedRoundTrip) {
    testgen::Gen gen(11);
    for (int i = 0; i < 1000; ++i) {
        const auto r = gen.record();
        ASSERT_NO_THROW(validate(r));
        const auto text = encode_record(r);
        EXPECT_EQ(text.find("null"), std::string::npos);
        EXPECT_EQ(decode_record(text), r) << text;
    }
}

TEST(Wire, ExtraKeysAreIgnored) {
    TimedRecord r;
    r.session_id = "s01";
    r.source = Source::radar;
    r.payload = RadarSample{1000, 72.0, 15.0, 800.0, false, true};
    r.device_ts_ms = 1000;
    auto j = nlohmann::json::parse(encode_record(r));
    j["battery"] = 55;
    j["payload"]["battery"] = 55;
    EXPECT_EQ(decode_record(j.dump()), r);
}

TEST(Wire, PayloadMustMatchSource) {
    TimedRecord r;
    r.session_id = "s01";
    r.source = Source::wearable;
    r.payload = WearableSample{};
    auto j = nlohmann::json::parse(encode_record(r));
    j["source"] = "radar";
    EXPECT_THROW(decode_record(j.dump()), SchemaError);
}

TEST(Wire, DecodeErrorKinds) {
    EXPECT_THROW(decode_record("{not json"), ParseError);
    EXPECT_THROW(decode_record(R"({"schema_version":1})"), SchemaError);

    auto j = nlohmann::json::parse(encode_record(annotation_record(make_kss(10, 7))));
    j["payload"]["value"] = 12;
    EXPECT_THROW(decode_record(j.dump()), ValidationError);
}

TEST(Wire, TopicPlan) {
    EXPECT_EQ(topic_for("s01", Source::radar), "cabin/s01/radar/data");
    EXPECT_EQ(topic_for("s01", Source::fused), "cabin/s01/fused");
    EXPECT_EQ(control_topic("s01"), "cabin/s01/control");
    EXPECT_THROW(topic_for("a/b", Source::camera), ValidationError);
    EXPECT_THROW(topic_for("a+b", Source::camera), ValidationError);
    EXPECT_THROW(topic_for("#", Source::camera), ValidationError);
    EXPECT_THROW(topic_for("", Source::camera), ValidationError);
}

TEST(Model, AnnotationRanges) {
    EXPECT_NO_THROW(validate(make_kss(0, 1)));
    EXPECT_NO_THROW(validate(make_kss(0, 9)));
    EXPECT_THROW(validate(make_kss(0, 0)), ValidationError);
    EXPECT_THROW(validate(make_kss(0, 10)), ValidationError);
    EXPECT_NO_THROW(validate(make_ess(0, 0)));
    EXPECT_NO_THROW(validate(make_ess(0, 24)));
    EXPECT_THROW(validate(make_ess(0, 25)), ValidationError);
    EXPECT_NO_THROW(validate(make_marker(0, "MWT2 start")));
}

TEST(Model, SampleInvariants) {
    WearableSample w;
    w.worn = false;
    w.hr_bpm = 60;
    EXPECT_THROW(validate(w), ValidationError);
    w.worn = true;
    w.drowsiness_score = 1.2;
    EXPECT_THROW(validate(w), ValidationError);

    CameraSample c;
    c.face_detected = false;
    c.aperture = 0.5;
    EXPECT_THROW(validate(c), ValidationError);

    RadarSample r;
    r.hr_bpm = 301;
    EXPECT_THROW(validate(r), ValidationError);

    FusedRow row;
    row.hr_bpm = 70;
    EXPECT_THROW(validate(row), ValidationError);
    row.hr_source = Source::camera;
    EXPECT_THROW(validate(row), ValidationError);
    row.hr_source = Source::radar;
    EXPECT_NO_THROW(validate(row));
}

TEST(Model, SourceNames) {
    for (auto s : {Source::radar, Source::wearable, Source::camera, Source::annotation, Source::fused}) {
        EXPECT_EQ(parse_source(to_string(s)), s);
    }
    EXPECT_THROW(parse_source("lidar"), ValidationError);
}

TEST(Model, Quantize4) {
    EXPECT_EQ(quantize4(0.12345), 0.1235);
    EXPECT_EQ(quantize4(-0.00001), 0.0);
    EXPECT_FALSE(std::signbit(quantize4(-0.00001)));
}
