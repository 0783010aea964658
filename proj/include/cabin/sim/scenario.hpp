#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cabin/core/model.hpp"
#include "cabin/radar/codec.hpp"
#include "cabin/transport/bus.hpp"
#include "cabin/transport/bytes.hpp"
#include "cabin/transport/clock.hpp"

namespace cabin::sim {

enum class SegmentKind { alert, drowsy_ramp, distracted, dropout, motion, nod_burst };

std::string_view to_string(SegmentKind k) noexcept;
SegmentKind parse_segment_kind(std::string_view text);

struct SegmentParams {
    double target_score = 0.9;   // drowsy_ramp: wearable score reached at t1
    Millis ocular_delay_ms = 0;  // drowsy_ramp: camera signs lag the physiology
    double gaze_yaw_deg = 40.0;  // distracted
    Source source = Source::radar; // dropout
    double nod_rate_per_min = 3.0; // nod_burst

    bool operator==(const SegmentParams&) const = default;
};

struct Segment {
    Millis t0_ms = 0;
    Millis t1_ms = 0;
    SegmentKind kind = SegmentKind::alert;
    SegmentParams params;

    bool contains(Millis t) const noexcept { return t >= t0_ms && t < t1_ms; }
    bool operator==(const Segment&) const = default;
};

struct SourceTiming {
    double rate_hz = 1.0;
    Millis clock_offset_ms = 0; // device clock = scenario time + offset
    Millis jitter_ms = 0;       // delivery delay drawn from [0, jitter]

    bool operator==(const SourceTiming&) const = default;
};

/// Scenario time runs from 0 to duration_ms; wall time is start_epoch_ms plus
/// scenario time plus delivery jitter.
struct ScenarioScript {
    std::uint64_t seed = 1;
    Millis duration_ms = 60000;
    Millis start_epoch_ms = 1'700'000'000'000;
    std::map<Source, SourceTiming> sources{
        {Source::radar, {1.0, 3'600'000, 40}},
        {Source::wearable, {1.0, -1'200, 40}},
        {Source::camera, {10.0, 350, 20}},
    };
    std::vector<Segment> segments;

    /// Throws ValidationError.
    void validate() const;
    bool operator==(const ScenarioScript&) const = default;
};

nlohmann::json script_to_json(const ScenarioScript& s);
/// Throws SchemaError for a malformed document and ValidationError for an
/// invalid script.
ScenarioScript script_from_json(const nlohmann::json& j);
ScenarioScript load_script(const std::string& path);

struct TruthTick {
    Millis t_ms = 0;
    double physio_score = 0.0;    // scripted wearable drowsiness
    double ocular_severity = 0.0; // 0 alert .. 1 heavy eyelids
    bool distracted = false;
    bool motion = false;
    bool nodding = false;
    std::map<Source, bool> dropout;

    bool operator==(const TruthTick&) const = default;
};

struct TruthBlink {
    Millis start_ms = 0;
    Millis duration_ms = 0;
    bool operator==(const TruthBlink&) const = default;
};

struct TruthWindow {
    Source source = Source::radar;
    Millis t0_ms = 0;
    Millis t1_ms = 0;
    bool operator==(const TruthWindow&) const = default;
};

/// Scenario-time ground truth (add start_epoch_ms for wall time).
struct GroundTruth {
    std::vector<TruthTick> ticks; // every 1000 ms, [0, duration)
    std::vector<TruthBlink> blinks;
    std::vector<Millis> nod_onsets_ms;
    std::vector<TruthWindow> dropouts;

    /// First tick whose scripted physio score reaches threshold.
    std::optional<Millis> first_physio_at_least(double threshold) const;
    bool operator==(const GroundTruth&) const = default;
};

struct ScheduledRecord {
    Millis send_wall_ms = 0;
    TimedRecord record;
};

struct ScheduledFrame {
    Millis send_wall_ms = 0;
    Millis scenario_ms = 0;
    radar::RadarFrame frame;
    radar::FrameBytes bytes{};
};

struct SimOutput {
    std::vector<ScheduledFrame> radar;
    std::vector<ScheduledRecord> wearable;
    std::vector<ScheduledRecord> camera;
    GroundTruth truth;

    /// The radar stream as one contiguous byte dump.
    std::vector<std::uint8_t> radar_bytes() const;
    /// All frames as TimedRecords (wall = send time), as the collector would
    /// stamp them on receipt.
    std::vector<TimedRecord> radar_records(const std::string& session_id) const;
};

/// Pure and deterministic in (script, seed). Throws ValidationError.
SimOutput generate(const ScenarioScript& script, const std::string& session_id = "sim");

struct ServeTargets {
    transport::MessageBus* bus = nullptr;  // wearable and camera records
    transport::ByteSink* radar = nullptr;  // radar frame bytes
    transport::ManualClock* clock = nullptr; // set to each send time before delivery
    std::string session_id;                // stamped onto every record
    bool send_radar = true;
    bool send_wearable = true;
    bool send_camera = true;
};

struct ServeStats {
    std::uint64_t radar_frames = 0;
    std::uint64_t wearable_records = 0;
    std::uint64_t camera_records = 0;
};

/// Delivers every scheduled item in send-time order. speed > 0 paces against
/// the steady clock (60 = sixty times real time); speed <= 0 sends as fast as
/// possible. Throws TransportError when a target is missing or unreachable.
ServeStats serve(const SimOutput& out, const ServeTargets& targets, double speed,
                 const std::atomic<bool>* cancel = nullptr);

} // namespace cabin::sim
