#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace cabin {

/// Milliseconds since the Unix epoch (UTC) or a millisecond duration,
/// depending on the field name.
using Millis = std::int64_t;

enum class Source { radar, wearable, camera, annotation, fused };

inline constexpr Source kSensorSources[] = {Source::radar, Source::wearable, Source::camera};

std::string_view to_string(Source s) noexcept;
/// Throws ValidationError for anything outside the closed set.
Source parse_source(std::string_view text);

struct RadarSample {
    std::uint32_t device_ts = 0; // ms since device boot
    double hr_bpm = 0.0;
    double rr_bpm = 0.0;
    double distance_mm = 0.0;
    bool motion = false;
    bool presence = false;

    bool operator==(const RadarSample&) const = default;
};

struct WearableSample {
    Millis device_ts = 0;
    std::optional<double> hr_bpm;
    std::optional<double> rr_bpm;
    std::optional<double> hrv_rmssd_ms;
    std::optional<double> drowsiness_score; // opaque, produced on the device
    bool worn = true;

    bool operator==(const WearableSample&) const = default;
};

/// Eyelid and pose observation from a camera. When face_detected is false
/// every optional is absent.
struct CameraSample {
    Millis device_ts = 0;
    std::optional<double> aperture; // 1 = fully open
    std::optional<double> gaze_yaw_deg;
    std::optional<double> gaze_pitch_deg;
    std::optional<double> head_yaw_deg;
    std::optional<double> head_pitch_deg;
    std::optional<double> head_roll_deg;
    bool face_detected = false;

    bool operator==(const CameraSample&) const = default;
};

enum class AnnotationKind { kss, ess, marker };

std::string_view to_string(AnnotationKind k) noexcept;
AnnotationKind parse_annotation_kind(std::string_view text);

struct Annotation {
    Millis ts_ms = 0;
    AnnotationKind kind = AnnotationKind::marker;
    std::variant<std::int64_t, std::string> value; // integer for kss/ess, text for marker

    bool operator==(const Annotation&) const = default;
};

enum class WarningLevel { normal, drowsy_warning, critical, distraction_warning };

std::string_view to_string(WarningLevel w) noexcept;
WarningLevel parse_warning(std::string_view text);

/// One grid-aligned output row of the fusion stage.
struct FusedRow {
    Millis grid_ts_ms = 0;
    std::optional<double> hr_bpm;
    std::optional<Source> hr_source;
    std::optional<double> rr_bpm;
    std::optional<Source> rr_source;
    std::optional<double> hrv_rmssd_ms;
    std::optional<double> drowsiness_physio;
    std::optional<double> perclos;
    std::optional<double> blink_rate_per_min;
    std::optional<double> long_blink_rate_per_min;
    std::optional<double> attention;
    std::optional<double> drowsiness_camera;
    WarningLevel warning = WarningLevel::normal;
    bool radar_reliable = false; // fresh, present and geometrically stable
    bool wearable_fresh = false; // fresh and worn
    bool camera_fresh = false;

    bool operator==(const FusedRow&) const = default;
};

using Payload = std::variant<RadarSample, WearableSample, CameraSample, Annotation, FusedRow>;

/// Source each payload alternative belongs to.
Source payload_source(const Payload& p) noexcept;

inline constexpr int kSchemaVersion = 1;

/// Wire envelope shared by every producer.
struct TimedRecord {
    int schema_version = kSchemaVersion;
    std::string session_id;
    Source source = Source::radar;
    std::int64_t seq = 0;
    Millis device_ts_ms = 0;
    Millis wall_ts_ms = 0;
    Payload payload;

    bool operator==(const TimedRecord&) const = default;
};

struct DeviceInfo {
    Source source = Source::radar;
    std::string model;

    bool operator==(const DeviceInfo&) const = default;
};

struct SessionMeta {
    std::string session_id;
    std::string subject_pseudo_id;
    Millis started_at_ms = 0;
    std::optional<Millis> ended_at_ms;
    std::vector<DeviceInfo> devices;
    std::map<Source, Millis> clock_offset_ms;
    std::vector<Annotation> annotations;

    bool operator==(const SessionMeta&) const = default;
};

/// Range checks shared by the decoder and the producers. Throw ValidationError.
void validate(const RadarSample& s);
void validate(const WearableSample& s);
void validate(const CameraSample& s);
void validate(const Annotation& a);
void validate(const FusedRow& r);
void validate(const TimedRecord& r);

Annotation make_kss(Millis ts_ms, int value);
Annotation make_ess(Millis ts_ms, int value);
Annotation make_marker(Millis ts_ms, std::string text);

/// Quantize to 4 fractional digits, the precision carried by CSV logs.
double quantize4(double v) noexcept;

} // namespace cabin
