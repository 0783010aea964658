#include "cabin/core/wire.hpp"

#include <limits>

#include "cabin/core/errors.hpp"

namespace cabin {

using nlohmann::json;

namespace {

// ---- encoding helpers -------------------------------------------------------

void put_opt(json& j, const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
}

json radar_to_json(const RadarSample& s) {
    return json{{"device_ts", s.device_ts}, {"hr_bpm", s.hr_bpm},   {"rr_bpm", s.rr_bpm},
                {"distance_mm", s.distance_mm}, {"motion", s.motion}, {"presence", s.presence}};
}

json wearable_to_json(const WearableSample& s) {
    json j{{"device_ts", s.device_ts}, {"worn", s.worn}};
    put_opt(j, "hr_bpm", s.hr_bpm);
    put_opt(j, "rr_bpm", s.rr_bpm);
    put_opt(j, "hrv_rmssd_ms", s.hrv_rmssd_ms);
    put_opt(j, "drowsiness_score", s.drowsiness_score);
    return j;
}

json camera_to_json(const CameraSample& s) {
    json j{{"device_ts", s.device_ts}, {"face_detected", s.face_detected}};
    put_opt(j, "aperture", s.aperture);
    put_opt(j, "gaze_yaw_deg", s.gaze_yaw_deg);
    put_opt(j, "gaze_pitch_deg", s.gaze_pitch_deg);
    put_opt(j, "head_yaw_deg", s.head_yaw_deg);
    put_opt(j, "head_pitch_deg", s.head_pitch_deg);
    put_opt(j, "head_roll_deg", s.head_roll_deg);
    return j;
}

// ---- decoding helpers -------------------------------------------------------

const json& field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(std::string("missing required key '") + key + "'");
    return *it;
}

double real_of(const json& v, const char* key) {
    if (!v.is_number()) throw SchemaError(std::string("key '") + key + "' must be a number");
    return v.get<double>();
}

double get_real(const json& obj, const char* key) { return real_of(field(obj, key), key); }

std::optional<double> get_opt_real(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) return std::nullopt;
    return real_of(*it, key);
}

std::int64_t get_int(const json& obj, const char* key) {
    const json& v = field(obj, key);
    if (v.is_number_unsigned()) {
        auto u = v.get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
            throw ValidationError(std::string("key '") + key + "' out of range");
        }
        return static_cast<std::int64_t>(u);
    }
    if (!v.is_number_integer()) throw SchemaError(std::string("key '") + key + "' must be an integer");
    return v.get<std::int64_t>();
}

bool get_bool(const json& obj, const char* key) {
    const json& v = field(obj, key);
    if (!v.is_boolean()) throw SchemaError(std::string("key '") + key + "' must be a boolean");
    return v.get<bool>();
}

std::string get_string(const json& obj, const char* key) {
    const json& v = field(obj, key);
    if (!v.is_string()) throw SchemaError(std::string("key '") + key + "' must be a string");
    return v.get<std::string>();
}

const json& get_object(const json& obj, const char* key) {
    const json& v = field(obj, key);
    if (!v.is_object()) throw SchemaError(std::string("key '") + key + "' must be an object");
    return v;
}

void require_object(const json& j, const char* what) {
    if (!j.is_object()) throw SchemaError(std::string(what) + " must be a JSON object");
}

RadarSample radar_from_json(const json& j) {
    RadarSample s;
    auto ts = get_int(j, "device_ts");
    if (ts < 0 || ts > std::numeric_limits<std::uint32_t>::max()) {
        throw ValidationError("radar device_ts out of u32 range");
    }
    s.device_ts = static_cast<std::uint32_t>(ts);
    s.hr_bpm = get_real(j, "hr_bpm");
    s.rr_bpm = get_real(j, "rr_bpm");
    s.distance_mm = get_real(j, "distance_mm");
    s.motion = get_bool(j, "motion");
    s.presence = get_bool(j, "presence");
    return s;
}

WearableSample wearable_from_json(const json& j) {
    WearableSample s;
    s.device_ts = get_int(j, "device_ts");
    s.worn = get_bool(j, "worn");
    s.hr_bpm = get_opt_real(j, "hr_bpm");
    s.rr_bpm = get_opt_real(j, "rr_bpm");
    s.hrv_rmssd_ms = get_opt_real(j, "hrv_rmssd_ms");
    s.drowsiness_score = get_opt_real(j, "drowsiness_score");
    return s;
}

CameraSample camera_from_json(const json& j) {
    CameraSample s;
    s.device_ts = get_int(j, "device_ts");
    s.face_detected = get_bool(j, "face_detected");
    s.aperture = get_opt_real(j, "aperture");
    s.gaze_yaw_deg = get_opt_real(j, "gaze_yaw_deg");
    s.gaze_pitch_deg = get_opt_real(j, "gaze_pitch_deg");
    s.head_yaw_deg = get_opt_real(j, "head_yaw_deg");
    s.head_pitch_deg = get_opt_real(j, "head_pitch_deg");
    s.head_roll_deg = get_opt_real(j, "head_roll_deg");
    return s;
}

std::optional<Source> get_opt_source(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) return std::nullopt;
    if (!it->is_string()) throw SchemaError(std::string("key '") + key + "' must be a string");
    return parse_source(it->get<std::string>());
}

Payload payload_from_json(Source source, const json& j) {
    require_object(j, "payload");
    switch (source) {
    case Source::radar: return radar_from_json(j);
    case Source::wearable: return wearable_from_json(j);
    case Source::camera: return camera_from_json(j);
    case Source::annotation: return annotation_from_json(j);
    case Source::fused: return fused_row_from_json(j);
    }
    throw SchemaError("unknown source");
}

} // namespace

json annotation_to_json(const Annotation& a) {
    json j{{"ts", a.ts_ms}, {"kind", to_string(a.kind)}};
    std::visit([&](const auto& v) { j["value"] = v; }, a.value);
    return j;
}

Annotation annotation_from_json(const json& j) {
    require_object(j, "annotation");
    Annotation a;
    a.ts_ms = get_int(j, "ts");
    a.kind = parse_annotation_kind(get_string(j, "kind"));
    const json& v = field(j, "value");
    if (a.kind == AnnotationKind::marker) {
        if (!v.is_string()) throw SchemaError("marker value must be a string");
        a.value = v.get<std::string>();
    } else {
        if (!v.is_number_integer()) throw SchemaError("kss/ess value must be an integer");
        a.value = v.get<std::int64_t>();
    }
    return a;
}

json fused_row_to_json(const FusedRow& r) {
    json j{{"grid_ts", r.grid_ts_ms},
           {"warning", to_string(r.warning)},
           {"radar_reliable", r.radar_reliable},
           {"wearable_fresh", r.wearable_fresh},
           {"camera_fresh", r.camera_fresh}};
    put_opt(j, "hr_bpm", r.hr_bpm);
    if (r.hr_source) j["hr_source"] = to_string(*r.hr_source);
    put_opt(j, "rr_bpm", r.rr_bpm);
    if (r.rr_source) j["rr_source"] = to_string(*r.rr_source);
    put_opt(j, "hrv_rmssd_ms", r.hrv_rmssd_ms);
    put_opt(j, "drowsiness_physio", r.drowsiness_physio);
    put_opt(j, "perclos", r.perclos);
    put_opt(j, "blink_rate_per_min", r.blink_rate_per_min);
    put_opt(j, "long_blink_rate_per_min", r.long_blink_rate_per_min);
    put_opt(j, "attention", r.attention);
    put_opt(j, "drowsiness_camera", r.drowsiness_camera);
    return j;
}

FusedRow fused_row_from_json(const json& j) {
    require_object(j, "fused row");
    FusedRow r;
    r.grid_ts_ms = get_int(j, "grid_ts");
    r.warning = parse_warning(get_string(j, "warning"));
    r.radar_reliable = get_bool(j, "radar_reliable");
    r.wearable_fresh = get_bool(j, "wearable_fresh");
    r.camera_fresh = get_bool(j, "camera_fresh");
    r.hr_bpm = get_opt_real(j, "hr_bpm");
    r.hr_source = get_opt_source(j, "hr_source");
    r.rr_bpm = get_opt_real(j, "rr_bpm");
    r.rr_source = get_opt_source(j, "rr_source");
    r.hrv_rmssd_ms = get_opt_real(j, "hrv_rmssd_ms");
    r.drowsiness_physio = get_opt_real(j, "drowsiness_physio");
    r.perclos = get_opt_real(j, "perclos");
    r.blink_rate_per_min = get_opt_real(j, "blink_rate_per_min");
    r.long_blink_rate_per_min = get_opt_real(j, "long_blink_rate_per_min");
    r.attention = get_opt_real(j, "attention");
    r.drowsiness_camera = get_opt_real(j, "drowsiness_camera");
    return r;
}

json payload_to_json(const Payload& p) {
    struct Visitor {
        json operator()(const RadarSample& s) const { return radar_to_json(s); }
        json operator()(const WearableSample& s) const { return wearable_to_json(s); }
        json operator()(const CameraSample& s) const { return camera_to_json(s); }
        json operator()(const Annotation& a) const { return annotation_to_json(a); }
        json operator()(const FusedRow& r) const { return fused_row_to_json(r); }
    };
    return std::visit(Visitor{}, p);
}

json record_to_json(const TimedRecord& r) {
    return json{{"schema_version", r.schema_version},
                {"session_id", r.session_id},
                {"source", to_string(r.source)},
                {"seq", r.seq},
                {"device_ts_ms", r.device_ts_ms},
                {"wall_ts_ms", r.wall_ts_ms},
                {"payload", payload_to_json(r.payload)}};
}

TimedRecord record_from_json(const json& j) {
    require_object(j, "record");
    TimedRecord r;
    r.schema_version = static_cast<int>(get_int(j, "schema_version"));
    if (r.schema_version != kSchemaVersion) {
        throw SchemaError("unsupported schema_version " + std::to_string(r.schema_version));
    }
    r.session_id = get_string(j, "session_id");
    r.source = parse_source(get_string(j, "source"));
    r.seq = get_int(j, "seq");
    r.device_ts_ms = get_int(j, "device_ts_ms");
    r.wall_ts_ms = get_int(j, "wall_ts_ms");
    r.payload = payload_from_json(r.source, get_object(j, "payload"));
    validate(r);
    return r;
}

std::string encode_record(const TimedRecord& r) {
    return record_to_json(r).dump(-1, ' ', false, json::error_handler_t::replace);
}

TimedRecord decode_record(std::string_view text) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    return record_from_json(j);
}

json session_meta_to_json(const SessionMeta& m) {
    json devices = json::array();
    for (const auto& d : m.devices) devices.push_back({{"source", to_string(d.source)}, {"model", d.model}});
    json offsets = json::object();
    for (const auto& [src, off] : m.clock_offset_ms) offsets[std::string(to_string(src))] = off;
    json annotations = json::array();
    for (const auto& a : m.annotations) annotations.push_back(annotation_to_json(a));
    json j{{"session_id", m.session_id},
           {"subject_pseudo_id", m.subject_pseudo_id},
           {"started_at", m.started_at_ms},
           {"devices", devices},
           {"clock_offset_ms", offsets},
           {"annotations", annotations}};
    if (m.ended_at_ms) j["ended_at"] = *m.ended_at_ms;
    return j;
}

SessionMeta session_meta_from_json(const json& j) {
    require_object(j, "session meta");
    SessionMeta m;
    m.session_id = get_string(j, "session_id");
    m.subject_pseudo_id = get_string(j, "subject_pseudo_id");
    m.started_at_ms = get_int(j, "started_at");
    if (j.contains("ended_at")) m.ended_at_ms = get_int(j, "ended_at");
    for (const auto& d : field(j, "devices")) {
        m.devices.push_back({parse_source(get_string(d, "source")), get_string(d, "model")});
    }
    for (const auto& [k, v] : field(j, "clock_offset_ms").items()) {
        if (!v.is_number_integer()) throw SchemaError("clock offset must be an integer");
        m.clock_offset_ms[parse_source(k)] = v.get<Millis>();
    }
    for (const auto& a : field(j, "annotations")) m.annotations.push_back(annotation_from_json(a));
    return m;
}

void validate_session_id(std::string_view session_id) {
    if (session_id.empty()) throw ValidationError("session id is empty");
    for (char c : session_id) {
        if (c == '/' || c == '#' || c == '+' || c == '\0') {
            throw ValidationError("session id contains forbidden character '" + std::string(1, c) + "'");
        }
    }
}

std::string topic_for(std::string_view session_id, Source source) {
    validate_session_id(session_id);
    std::string t = "cabin/";
    t += session_id;
    if (source == Source::fused) return t + "/fused";
    t += '/';
    t += to_string(source);
    return t + "/data";
}

std::string control_topic(std::string_view session_id) {
    validate_session_id(session_id);
    return "cabin/" + std::string(session_id) + "/control";
}

} // namespace cabin
