#include "cabin/core/model.hpp"

#include <cmath>

#include "cabin/core/errors.hpp"

namespace cabin {

std::string_view to_string(Source s) noexcept {
    switch (s) {
    case Source::radar: return "radar";
    case Source::wearable: return "wearable";
    case Source::camera: return "camera";
    case Source::annotation: return "annotation";
    case Source::fused: return "fused";
    }
    return "radar";
}

Source parse_source(std::string_view text) {
    if (text == "radar") return Source::radar;
    if (text == "wearable") return Source::wearable;
    if (text == "camera") return Source::camera;
    if (text == "annotation") return Source::annotation;
    if (text == "fused") return Source::fused;
    throw ValidationError("unknown source '" + std::string(text) + "'");
}

std::string_view to_string(AnnotationKind k) noexcept {
    switch (k) {
    case AnnotationKind::kss: return "kss";
    case AnnotationKind::ess: return "ess";
    case AnnotationKind::marker: return "marker";
    }
    return "marker";
}

AnnotationKind parse_annotation_kind(std::string_view text) {
    if (text == "kss") return AnnotationKind::kss;
    if (text == "ess") return AnnotationKind::ess;
    if (text == "marker") return AnnotationKind::marker;
    throw ValidationError("unknown annotation kind '" + std::string(text) + "'");
}

std::string_view to_string(WarningLevel w) noexcept {
    switch (w) {
    case WarningLevel::normal: return "normal";
    case WarningLevel::drowsy_warning: return "drowsy_warning";
    case WarningLevel::critical: return "critical";
    case WarningLevel::distraction_warning: return "distraction_warning";
    }
    return "normal";
}

WarningLevel parse_warning(std::string_view text) {
    if (text == "normal") return WarningLevel::normal;
    if (text == "drowsy_warning") return WarningLevel::drowsy_warning;
    if (text == "critical") return WarningLevel::critical;
    if (text == "distraction_warning") return WarningLevel::distraction_warning;
    throw ValidationError("unknown warning state '" + std::string(text) + "'");
}

Source payload_source(const Payload& p) noexcept {
    switch (p.index()) {
    case 0: return Source::radar;
    case 1: return Source::wearable;
    case 2: return Source::camera;
    case 3: return Source::annotation;
    default: return Source::fused;
    }
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

bool finite(double v) { return std::isfinite(v); }

void check_range(double v, double lo, double hi, const char* name) {
    require(finite(v) && v >= lo && v <= hi,
            std::string(name) + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

void check_opt_range(const std::optional<double>& v, double lo, double hi, const char* name) {
    if (v) check_range(*v, lo, hi, name);
}

void check_fraction(const std::optional<double>& v, const char* name) {
    check_opt_range(v, 0.0, 1.0, name);
}

} // namespace

void validate(const RadarSample& s) {
    check_range(s.hr_bpm, 0.0, 300.0, "radar hr_bpm");
    check_range(s.rr_bpm, 0.0, 60.0, "radar rr_bpm");
    check_range(s.distance_mm, 0.0, 65535.0, "radar distance_mm");
}

void validate(const WearableSample& s) {
    require(s.device_ts >= 0, "wearable device_ts negative");
    check_opt_range(s.hr_bpm, 0.0, 300.0, "wearable hr_bpm");
    check_opt_range(s.rr_bpm, 0.0, 60.0, "wearable rr_bpm");
    check_opt_range(s.hrv_rmssd_ms, 0.0, 10000.0, "wearable hrv_rmssd_ms");
    check_fraction(s.drowsiness_score, "wearable drowsiness_score");
    require(s.worn || !s.hr_bpm, "wearable hr_bpm present while not worn");
}

void validate(const CameraSample& s) {
    require(s.device_ts >= 0, "camera device_ts negative");
    const std::optional<double>* angles[] = {&s.gaze_yaw_deg, &s.gaze_pitch_deg, &s.head_yaw_deg,
                                             &s.head_pitch_deg, &s.head_roll_deg};
    if (!s.face_detected) {
        require(!s.aperture, "camera aperture present without a face");
        for (auto* a : angles) require(!a->has_value(), "camera angle present without a face");
        return;
    }
    require(s.aperture.has_value(), "camera aperture missing with a face");
    check_range(*s.aperture, 0.0, 1.0, "camera aperture");
    for (auto* a : angles) {
        require(a->has_value(), "camera angle missing with a face");
        check_range(**a, -90.0, 90.0, "camera angle");
    }
}

void validate(const Annotation& a) {
    require(a.ts_ms >= 0, "annotation ts negative");
    switch (a.kind) {
    case AnnotationKind::kss: {
        const auto* v = std::get_if<std::int64_t>(&a.value);
        require(v != nullptr, "kss value must be an integer");
        require(*v >= 1 && *v <= 9, "kss out of range [1, 9]");
        break;
    }
    case AnnotationKind::ess: {
        const auto* v = std::get_if<std::int64_t>(&a.value);
        require(v != nullptr, "ess value must be an integer");
        require(*v >= 0 && *v <= 24, "ess out of range [0, 24]");
        break;
    }
    case AnnotationKind::marker:
        require(std::holds_alternative<std::string>(a.value), "marker value must be a string");
        break;
    }
}

void validate(const FusedRow& r) {
    require(r.grid_ts_ms >= 0, "grid_ts negative");
    require(r.hr_bpm.has_value() == r.hr_source.has_value(), "hr_bpm and hr_source must be present together");
    require(r.rr_bpm.has_value() == r.rr_source.has_value(), "rr_bpm and rr_source must be present together");
    for (auto src : {r.hr_source, r.rr_source}) {
        require(!src || *src == Source::radar || *src == Source::wearable, "channel source must be radar or wearable");
    }
    check_opt_range(r.hr_bpm, 0.0, 300.0, "hr_bpm");
    check_opt_range(r.rr_bpm, 0.0, 60.0, "rr_bpm");
    check_opt_range(r.hrv_rmssd_ms, 0.0, 10000.0, "hrv_rmssd_ms");
    check_fraction(r.drowsiness_physio, "drowsiness_physio");
    check_fraction(r.perclos, "perclos");
    check_fraction(r.attention, "attention");
    check_fraction(r.drowsiness_camera, "drowsiness_camera");
    check_opt_range(r.blink_rate_per_min, 0.0, 1e6, "blink_rate_per_min");
    check_opt_range(r.long_blink_rate_per_min, 0.0, 1e6, "long_blink_rate_per_min");
}

void validate(const TimedRecord& r) {
    require(r.schema_version == kSchemaVersion, "unsupported schema_version");
    require(r.seq >= 0, "seq negative");
    require(r.wall_ts_ms >= 0, "wall_ts negative");
    require(payload_source(r.payload) == r.source, "payload does not match source");
    std::visit([](const auto& p) { validate(p); }, r.payload);
}

Annotation make_kss(Millis ts_ms, int value) {
    return Annotation{ts_ms, AnnotationKind::kss, std::int64_t{value}};
}

Annotation make_ess(Millis ts_ms, int value) {
    return Annotation{ts_ms, AnnotationKind::ess, std::int64_t{value}};
}

Annotation make_marker(Millis ts_ms, std::string text) {
    return Annotation{ts_ms, AnnotationKind::marker, std::move(text)};
}

double quantize4(double v) noexcept {
    const double q = std::round(v * 1e4) / 1e4;
    return q == 0.0 ? 0.0 : q; // no negative zero
}

} // namespace cabin
