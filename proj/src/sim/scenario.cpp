#include "cabin/sim/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <thread>

#include "cabin/core/errors.hpp"
#include "cabin/core/wire.hpp"

namespace cabin::sim {

using nlohmann::json;

std::string_view to_string(SegmentKind k) noexcept {
    switch (k) {
    case SegmentKind::alert: return "alert";
    case SegmentKind::drowsy_ramp: return "drowsy_ramp";
    case SegmentKind::distracted: return "distracted";
    case SegmentKind::dropout: return "dropout";
    case SegmentKind::motion: return "motion";
    case SegmentKind::nod_burst: return "nod_burst";
    }
    return "alert";
}

SegmentKind parse_segment_kind(std::string_view text) {
    for (auto k : {SegmentKind::alert, SegmentKind::drowsy_ramp, SegmentKind::distracted, SegmentKind::dropout,
                   SegmentKind::motion, SegmentKind::nod_burst}) {
        if (text == to_string(k)) return k;
    }
    throw ValidationError("unknown segment kind '" + std::string(text) + "'");
}

namespace {

constexpr double kBaselineScore = 0.1;

bool is_sensor(Source s) { return s == Source::radar || s == Source::wearable || s == Source::camera; }

/// Segments that may not overlap share a channel.
std::string channel_of(const Segment& s) {
    switch (s.kind) {
    case SegmentKind::alert:
    case SegmentKind::drowsy_ramp: return "state";
    case SegmentKind::distracted: return "gaze";
    case SegmentKind::dropout: return "dropout:" + std::string(cabin::to_string(s.params.source));
    case SegmentKind::motion: return "motion";
    case SegmentKind::nod_burst: return "nods";
    }
    return "state";
}

} // namespace

void ScenarioScript::validate() const {
    if (duration_ms <= 0) throw ValidationError("duration_ms must be positive");
    for (auto s : kSensorSources) {
        auto it = sources.find(s);
        if (it == sources.end()) throw ValidationError("missing timing for " + std::string(cabin::to_string(s)));
        const auto& t = it->second;
        if (!(t.rate_hz > 0.0) || !std::isfinite(t.rate_hz) || t.rate_hz > 1000.0) {
            throw ValidationError("rate_hz for " + std::string(cabin::to_string(s)) + " must be in (0, 1000]");
        }
        if (t.jitter_ms < 0) throw ValidationError("jitter_ms must be non-negative");
    }
    for (const auto& [s, t] : sources) {
        if (!is_sensor(s)) throw ValidationError("timing given for non-sensor source");
    }

    std::map<std::string, std::vector<const Segment*>> by_channel;
    for (const auto& seg : segments) {
        if (seg.t0_ms < 0) throw ValidationError("segment t0_ms must be non-negative");
        if (seg.t1_ms <= seg.t0_ms) throw ValidationError("segment t1_ms must be greater than t0_ms");
        switch (seg.kind) {
        case SegmentKind::drowsy_ramp:
            if (!(seg.params.target_score >= 0.0 && seg.params.target_score <= 1.0)) {
                throw ValidationError("drowsy_ramp target_score must be in [0, 1]");
            }
            if (seg.params.ocular_delay_ms < 0) throw ValidationError("ocular_delay_ms must be non-negative");
            break;
        case SegmentKind::distracted:
            if (!(std::abs(seg.params.gaze_yaw_deg) <= 90.0)) throw ValidationError("gaze_yaw_deg must be in [-90, 90]");
            break;
        case SegmentKind::dropout:
            if (!is_sensor(seg.params.source)) throw ValidationError("dropout source must be a sensor");
            break;
        case SegmentKind::nod_burst:
            if (!(seg.params.nod_rate_per_min > 0.0 && seg.params.nod_rate_per_min <= 30.0)) {
                throw ValidationError("nod_burst rate must be in (0, 30] per minute");
            }
            break;
        default:
            break;
        }
        by_channel[channel_of(seg)].push_back(&seg);
    }
    for (auto& [channel, segs] : by_channel) {
        std::sort(segs.begin(), segs.end(), [](const Segment* a, const Segment* b) { return a->t0_ms < b->t0_ms; });
        for (std::size_t i = 1; i < segs.size(); ++i) {
            if (segs[i]->t0_ms < segs[i - 1]->t1_ms) {
                throw ValidationError("overlapping segments on channel " + channel);
            }
        }
    }
}

// ---- JSON ----

json script_to_json(const ScenarioScript& s) {
    json j;
    j["seed"] = s.seed;
    j["duration_ms"] = s.duration_ms;
    j["start_epoch_ms"] = s.start_epoch_ms;
    json sources = json::object();
    for (const auto& [src, t] : s.sources) {
        sources[std::string(cabin::to_string(src))] = {
            {"rate_hz", t.rate_hz}, {"clock_offset_ms", t.clock_offset_ms}, {"jitter_ms", t.jitter_ms}};
    }
    j["sources"] = sources;
    json segs = json::array();
    for (const auto& seg : s.segments) {
        json js{{"t0_ms", seg.t0_ms}, {"t1_ms", seg.t1_ms}, {"kind", std::string(to_string(seg.kind))}};
        json params = json::object();
        switch (seg.kind) {
        case SegmentKind::drowsy_ramp:
            params["target_score"] = seg.params.target_score;
            params["ocular_delay_ms"] = seg.params.ocular_delay_ms;
            break;
        case SegmentKind::distracted: params["gaze_yaw_deg"] = seg.params.gaze_yaw_deg; break;
        case SegmentKind::dropout: params["source"] = std::string(cabin::to_string(seg.params.source)); break;
        case SegmentKind::nod_burst: params["rate_per_min"] = seg.params.nod_rate_per_min; break;
        default: break;
        }
        if (!params.empty()) js["params"] = params;
        segs.push_back(js);
    }
    j["segments"] = segs;
    return j;
}

ScenarioScript script_from_json(const json& j) {
    ScenarioScript s;
    try {
        if (!j.is_object()) throw SchemaError("scenario script must be a JSON object");
        s.seed = j.value("seed", s.seed);
        s.duration_ms = j.at("duration_ms").get<Millis>();
        s.start_epoch_ms = j.value("start_epoch_ms", s.start_epoch_ms);
        if (j.contains("sources")) {
            for (const auto& [name, t] : j.at("sources").items()) {
                const Source src = parse_source(name);
                auto& timing = s.sources[src];
                timing.rate_hz = t.value("rate_hz", timing.rate_hz);
                timing.clock_offset_ms = t.value("clock_offset_ms", timing.clock_offset_ms);
                timing.jitter_ms = t.value("jitter_ms", timing.jitter_ms);
            }
        }
        if (j.contains("segments")) {
            for (const auto& js : j.at("segments")) {
                Segment seg;
                seg.t0_ms = js.at("t0_ms").get<Millis>();
                seg.t1_ms = js.at("t1_ms").get<Millis>();
                seg.kind = parse_segment_kind(js.at("kind").get<std::string>());
                const json params = js.value("params", json::object());
                seg.params.target_score = params.value("target_score", seg.params.target_score);
                seg.params.ocular_delay_ms = params.value("ocular_delay_ms", seg.params.ocular_delay_ms);
                seg.params.gaze_yaw_deg = params.value("gaze_yaw_deg", seg.params.gaze_yaw_deg);
                seg.params.nod_rate_per_min = params.value("rate_per_min", seg.params.nod_rate_per_min);
                if (params.contains("source")) seg.params.source = parse_source(params.at("source").get<std::string>());
                if (seg.kind == SegmentKind::dropout && !params.contains("source")) {
                    throw SchemaError("dropout segment needs params.source");
                }
                s.segments.push_back(seg);
            }
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad scenario script: ") + e.what());
    }
    s.validate();
    return s;
}

ScenarioScript load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario script '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("scenario script '" + path + "': " + e.what());
    }
    return script_from_json(j);
}

// ---- generation ----

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Distribution helpers written out so the sequence does not depend on the
/// standard library's distribution implementations.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream) : gen_(splitmix64(seed ^ splitmix64(stream))) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal(double mean, double stddev) {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    Millis delay(Millis jitter) { return jitter <= 0 ? 0 : static_cast<Millis>(gen_() % static_cast<std::uint64_t>(jitter + 1)); }

private:
    std::mt19937_64 gen_;
};

double round_to(double v, double step) { return std::round(v / step) * step; }

/// Scripted physiology and eyelid severity, evaluated at any scenario time.
class Timeline {
public:
    explicit Timeline(const ScenarioScript& s) {
        for (const auto& seg : s.segments) {
            switch (seg.kind) {
            case SegmentKind::alert:
            case SegmentKind::drowsy_ramp: state_.push_back(seg); break;
            case SegmentKind::distracted: gaze_.push_back(seg); break;
            case SegmentKind::dropout: dropouts_.push_back(seg); break;
            case SegmentKind::motion: motion_.push_back(seg); break;
            case SegmentKind::nod_burst: nods_.push_back(seg); break;
            }
        }
        std::sort(state_.begin(), state_.end(), [](const Segment& a, const Segment& b) { return a.t0_ms < b.t0_ms; });
    }

    /// (physio score, ocular severity)
    std::pair<double, double> state_at(Millis t) const {
        double score = kBaselineScore;
        double severity = 0.0;
        for (const auto& seg : state_) {
            if (seg.t0_ms > t) break;
            if (seg.kind == SegmentKind::alert) {
                score = kBaselineScore;
                severity = 0.0;
                continue;
            }
            const double span = static_cast<double>(seg.t1_ms - seg.t0_ms);
            const double p = std::clamp(static_cast<double>(t - seg.t0_ms) / span, 0.0, 1.0);
            const double q =
                std::clamp(static_cast<double>(t - seg.t0_ms - seg.params.ocular_delay_ms) / span, 0.0, 1.0);
            score = score + (seg.params.target_score - score) * p;
            severity = severity + (seg.params.target_score - severity) * q;
        }
        return {score, severity};
    }

    const Segment* distracted_at(Millis t) const { return find(gaze_, t); }
    bool motion_at(Millis t) const { return find(motion_, t) != nullptr; }
    bool dropped(Source s, Millis t) const {
        return std::any_of(dropouts_.begin(), dropouts_.end(),
                           [&](const Segment& seg) { return seg.params.source == s && seg.contains(t); });
    }
    const std::vector<Segment>& nod_segments() const { return nods_; }
    const std::vector<Segment>& dropout_segments() const { return dropouts_; }

private:
    static const Segment* find(const std::vector<Segment>& v, Millis t) {
        for (const auto& seg : v) {
            if (seg.contains(t)) return &seg;
        }
        return nullptr;
    }

    std::vector<Segment> state_, gaze_, dropouts_, motion_, nods_;
};

Millis sample_time(std::size_t i, double rate_hz) {
    return static_cast<Millis>(std::floor(static_cast<double>(i) * 1000.0 / rate_hz));
}

struct NodPlan {
    std::vector<Millis> onsets;
    static constexpr Millis kDuration = 1500;
    static constexpr double kDepthDeg = 25.0;

    double pitch_offset(Millis t) const {
        auto it = std::upper_bound(onsets.begin(), onsets.end(), t);
        if (it == onsets.begin()) return 0.0;
        const Millis onset = *std::prev(it);
        const Millis dt = t - onset;
        if (dt >= kDuration) return 0.0;
        return -kDepthDeg * std::sin(std::numbers::pi * static_cast<double>(dt) / static_cast<double>(kDuration));
    }
};

NodPlan plan_nods(const Timeline& tl) {
    NodPlan plan;
    for (const auto& seg : tl.nod_segments()) {
        const auto period = static_cast<Millis>(std::llround(60000.0 / seg.params.nod_rate_per_min));
        for (Millis t = seg.t0_ms + period / 2; t + NodPlan::kDuration <= seg.t1_ms; t += period) {
            plan.onsets.push_back(t);
        }
    }
    std::sort(plan.onsets.begin(), plan.onsets.end());
    return plan;
}

/// Eyelid closures: regular blinks whose rate and length grow with severity,
/// occasionally replaced by a longer lid droop.
std::vector<TruthBlink> plan_blinks(const ScenarioScript& s, const Timeline& tl) {
    Rng rng(s.seed, 0xB11E);
    std::vector<TruthBlink> out;
    Millis t = static_cast<Millis>(rng.uniform(500.0, 3000.0));
    while (t < s.duration_ms) {
        const double v = tl.state_at(t).second;
        Millis dur = static_cast<Millis>(rng.uniform(150.0, 250.0) + 400.0 * v);
        if (rng.uniform() < 0.1 * v) dur = static_cast<Millis>(rng.uniform(1000.0, 2000.0));
        out.push_back({t, dur});
        const double rate_per_min = 15.0 + 5.0 * v;
        const double mean_gap = 60000.0 / rate_per_min;
        t += dur + static_cast<Millis>(rng.uniform(0.5, 1.5) * mean_gap);
    }
    return out;
}

bool in_blink(const std::vector<TruthBlink>& blinks, Millis t) {
    auto it = std::upper_bound(blinks.begin(), blinks.end(), t,
                               [](Millis x, const TruthBlink& b) { return x < b.start_ms; });
    if (it == blinks.begin()) return false;
    const auto& b = *std::prev(it);
    return t < b.start_ms + b.duration_ms;
}

} // namespace

std::optional<Millis> GroundTruth::first_physio_at_least(double threshold) const {
    for (const auto& tick : ticks) {
        if (tick.physio_score >= threshold) return tick.t_ms;
    }
    return std::nullopt;
}

std::vector<std::uint8_t> SimOutput::radar_bytes() const {
    std::vector<std::uint8_t> out;
    out.reserve(radar.size() * radar::kFrameSize);
    for (const auto& f : radar) out.insert(out.end(), f.bytes.begin(), f.bytes.end());
    return out;
}

std::vector<TimedRecord> SimOutput::radar_records(const std::string& session_id) const {
    std::vector<TimedRecord> out;
    out.reserve(radar.size());
    std::int64_t seq = 0;
    for (const auto& f : radar) {
        TimedRecord r;
        r.session_id = session_id;
        r.source = Source::radar;
        r.seq = seq++;
        r.device_ts_ms = f.frame.device_ts;
        r.wall_ts_ms = f.send_wall_ms;
        r.payload = f.frame;
        out.push_back(std::move(r));
    }
    return out;
}

SimOutput generate(const ScenarioScript& script, const std::string& session_id) {
    script.validate();
    validate_session_id(session_id);
    const Timeline tl(script);
    const auto nods = plan_nods(tl);
    SimOutput out;
    out.truth.blinks = plan_blinks(script, tl);
    out.truth.nod_onsets_ms = nods.onsets;
    for (const auto& seg : tl.dropout_segments()) {
        out.truth.dropouts.push_back({seg.params.source, seg.t0_ms, std::min(seg.t1_ms, script.duration_ms)});
    }

    for (Millis t = 0; t < script.duration_ms; t += 1000) {
        TruthTick tick;
        tick.t_ms = t;
        std::tie(tick.physio_score, tick.ocular_severity) = tl.state_at(t);
        tick.distracted = tl.distracted_at(t) != nullptr;
        tick.motion = tl.motion_at(t);
        tick.nodding = nods.pitch_offset(t) != 0.0;
        for (auto s : kSensorSources) tick.dropout[s] = tl.dropped(s, t);
        out.truth.ticks.push_back(tick);
    }

    // Radar: 17-byte frames, device clock in ms since boot (u32, wraps).
    {
        const auto& timing = script.sources.at(Source::radar);
        Rng rng(script.seed, 0x4ADA4);
        for (std::size_t i = 0;; ++i) {
            const Millis t = sample_time(i, timing.rate_hz);
            if (t >= script.duration_ms) break;
            const Millis delay = rng.delay(timing.jitter_ms);
            const bool motion = tl.motion_at(t);
            double hr = rng.normal(70.0, 1.0) + (motion ? rng.normal(0.0, 10.0) : 0.0);
            double rr = rng.normal(15.0, 0.5) + (motion ? rng.normal(0.0, 3.0) : 0.0);
            double dist = rng.normal(800.0, motion ? 150.0 : 3.0);
            if (tl.dropped(Source::radar, t)) continue;

            radar::RadarFrame f;
            f.device_ts = static_cast<std::uint32_t>(static_cast<std::uint64_t>(t + timing.clock_offset_ms) & 0xFFFFFFFFULL);
            f.hr_bpm = std::round(std::clamp(hr, 30.0, 220.0) * 10.0) / 10.0;
            f.rr_bpm = std::round(std::clamp(rr, 4.0, 60.0) * 10.0) / 10.0;
            f.distance_mm = std::round(std::clamp(dist, 0.0, 65535.0));
            f.motion = motion;
            f.presence = true;
            ScheduledFrame sf;
            sf.scenario_ms = t;
            sf.send_wall_ms = script.start_epoch_ms + t + delay;
            sf.bytes = radar::encode_frame(f);
            // Store exactly what a decoder yields.
            f.hr_bpm = static_cast<std::uint16_t>(std::lround(f.hr_bpm * 10.0)) / 10.0;
            f.rr_bpm = static_cast<std::uint16_t>(std::lround(f.rr_bpm * 10.0)) / 10.0;
            sf.frame = f;
            out.radar.push_back(sf);
        }
    }

    // Wearable: epoch-based watch clock with a fixed skew.
    {
        const auto& timing = script.sources.at(Source::wearable);
        Rng rng(script.seed, 0x3EA4);
        std::int64_t seq = 0;
        for (std::size_t i = 0;; ++i) {
            const Millis t = sample_time(i, timing.rate_hz);
            if (t >= script.duration_ms) break;
            const Millis delay = rng.delay(timing.jitter_ms);
            const double hr = rng.normal(70.0, 1.0);
            const double rr = rng.normal(15.0, 0.5);
            const double hrv = rng.normal(45.0, 2.5);
            const double noise = rng.normal(0.0, 0.01);
            if (tl.dropped(Source::wearable, t)) continue;

            WearableSample w;
            w.device_ts = script.start_epoch_ms + t + timing.clock_offset_ms;
            w.hr_bpm = round_to(std::clamp(hr, 30.0, 220.0), 0.1);
            w.rr_bpm = round_to(std::clamp(rr, 4.0, 60.0), 0.1);
            w.hrv_rmssd_ms = round_to(std::max(hrv, 1.0), 0.1);
            w.drowsiness_score = round_to(std::clamp(tl.state_at(t).first + noise, 0.0, 1.0), 0.001);
            w.worn = true;

            TimedRecord r;
            r.session_id = session_id;
            r.source = Source::wearable;
            r.seq = seq++;
            r.device_ts_ms = w.device_ts;
            r.wall_ts_ms = script.start_epoch_ms + t + delay;
            r.payload = w;
            out.wearable.push_back({r.wall_ts_ms, r});
        }
    }

    // Camera: ms since camera start.
    {
        const auto& timing = script.sources.at(Source::camera);
        Rng rng(script.seed, 0xCA3E4A);
        std::int64_t seq = 0;
        for (std::size_t i = 0;; ++i) {
            const Millis t = sample_time(i, timing.rate_hz);
            if (t >= script.duration_ms) break;
            const Millis delay = rng.delay(timing.jitter_ms);
            const double v = tl.state_at(t).second;
            const double open_noise = rng.normal(0.0, 0.02);
            const double closed_noise = std::abs(rng.normal(0.0, 0.02));
            const double gaze_yaw_noise = rng.normal(0.0, 3.0);
            const double gaze_pitch_noise = rng.normal(0.0, 2.0);
            const double head_yaw_noise = rng.normal(0.0, 1.0);
            const double head_pitch_noise = rng.normal(0.0, 1.5);
            const double head_roll_noise = rng.normal(0.0, 1.0);
            if (tl.dropped(Source::camera, t)) continue;

            CameraSample c;
            c.device_ts = t + timing.clock_offset_ms;
            c.face_detected = true;
            const double aperture =
                in_blink(out.truth.blinks, t) ? 0.04 + closed_noise : 0.9 - 0.2 * v + open_noise;
            c.aperture = round_to(std::clamp(aperture, 0.0, 1.0), 0.001);
            double gaze_yaw = gaze_yaw_noise;
            if (const auto* seg = tl.distracted_at(t)) gaze_yaw += seg->params.gaze_yaw_deg;
            c.gaze_yaw_deg = round_to(std::clamp(gaze_yaw, -90.0, 90.0), 0.1);
            c.gaze_pitch_deg = round_to(gaze_pitch_noise, 0.1);
            c.head_yaw_deg = round_to(std::clamp(0.5 * gaze_yaw + head_yaw_noise, -90.0, 90.0), 0.1);
            c.head_pitch_deg = round_to(std::clamp(nods.pitch_offset(t) + head_pitch_noise, -90.0, 90.0), 0.1);
            c.head_roll_deg = round_to(head_roll_noise, 0.1);

            TimedRecord r;
            r.session_id = session_id;
            r.source = Source::camera;
            r.seq = seq++;
            r.device_ts_ms = c.device_ts;
            r.wall_ts_ms = script.start_epoch_ms + t + delay;
            r.payload = c;
            out.camera.push_back({r.wall_ts_ms, r});
        }
    }
    return out;
}

// ---- serving ----

ServeStats serve(const SimOutput& out, const ServeTargets& targets, double speed, const std::atomic<bool>* cancel) {
    struct Item {
        Millis wall;
        int rank;
        std::size_t index;
    };
    std::vector<Item> items;
    if (targets.send_radar && !out.radar.empty()) {
        if (!targets.radar) throw TransportError("no radar byte stream to serve into");
        for (std::size_t i = 0; i < out.radar.size(); ++i) items.push_back({out.radar[i].send_wall_ms, 0, i});
    }
    auto check_bus = [&](Source s) {
        if (!targets.bus) throw TransportError("no message bus to serve into");
        const auto topic = topic_for(targets.session_id.empty() ? "sim" : targets.session_id, s);
        if (!targets.bus->has_route(topic)) throw TransportError("nobody subscribed to " + topic);
    };
    if (targets.send_wearable && !out.wearable.empty()) {
        check_bus(Source::wearable);
        for (std::size_t i = 0; i < out.wearable.size(); ++i) items.push_back({out.wearable[i].send_wall_ms, 1, i});
    }
    if (targets.send_camera && !out.camera.empty()) {
        check_bus(Source::camera);
        for (std::size_t i = 0; i < out.camera.size(); ++i) items.push_back({out.camera[i].send_wall_ms, 2, i});
    }
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        return a.wall != b.wall ? a.wall < b.wall : a.rank < b.rank;
    });

    ServeStats stats;
    if (items.empty()) return stats;
    const Millis first_wall = items.front().wall;
    const auto real_start = std::chrono::steady_clock::now();

    for (const auto& item : items) {
        if (cancel && cancel->load()) break;
        if (speed > 0.0) {
            const auto due = real_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                              std::chrono::duration<double, std::milli>(
                                                  static_cast<double>(item.wall - first_wall) / speed));
            std::this_thread::sleep_until(due);
        }
        if (targets.clock) targets.clock->set(item.wall);
        switch (item.rank) {
        case 0: {
            const auto& f = out.radar[item.index];
            targets.radar->write(f.bytes);
            ++stats.radar_frames;
            break;
        }
        case 1:
        case 2: {
            const auto& sr = item.rank == 1 ? out.wearable[item.index] : out.camera[item.index];
            TimedRecord r = sr.record;
            if (!targets.session_id.empty()) r.session_id = targets.session_id;
            targets.bus->publish(topic_for(r.session_id, r.source), encode_record(r));
            ++(item.rank == 1 ? stats.wearable_records : stats.camera_records);
            break;
        }
        }
    }
    return stats;
}

} // namespace cabin::sim
