#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cabin/core/model.hpp"
#include "cabin/ocular/metrics.hpp"

namespace cabin::align {

/// session_ts = device_ts + offset_ms
struct ClockModel {
    Source source = Source::radar;
    Millis offset_ms = 0;
    bool calibrated = false;
    Millis residual_ms = 0; // median absolute deviation of the offset samples

    bool operator==(const ClockModel&) const = default;
};

inline constexpr std::size_t kMinCalibrationRecords = 5;
inline constexpr std::size_t kDefaultCalibrationRecords = 20;

/// Median of (wall - device) over the first n records by seq. Radar device
/// clocks are u32 and are unwrapped before the median. Throws CalibrationError
/// with fewer than kMinCalibrationRecords usable records.
ClockModel calibrate(Source source, std::span<const TimedRecord> first_records,
                     std::size_t n = kDefaultCalibrationRecords);

struct GridConfig {
    Millis step_ms = 1000;
    Millis lateness_ms = 500;
    std::map<Source, Millis> staleness_ms{{Source::radar, 2500}, {Source::wearable, 5000}, {Source::camera, 1500}};
    // Trailing buffers handed to the metric stages with each snapshot.
    Millis radar_window_ms = 5000;
    Millis camera_window_ms = 70000;
    std::size_t calibration_records = kDefaultCalibrationRecords;

    Millis staleness(Source s) const;
    /// Throws ValidationError.
    void validate() const;
};

template <typename Sample>
struct Stamped {
    Millis ts_ms = 0;
    std::int64_t seq = 0;
    Sample sample;

    bool operator==(const Stamped&) const = default;
};

/// Per-source view of the session at one grid tick.
struct AlignedSnapshot {
    Millis grid_ts_ms = 0;

    // Latest sample at or before the tick, only when within staleness.
    std::optional<Stamped<RadarSample>> radar;
    std::optional<Stamped<WearableSample>> wearable;
    std::optional<Stamped<CameraSample>> camera;
    bool radar_fresh = false;
    bool wearable_fresh = false;
    bool camera_fresh = false;

    // Trailing windows (tick - window, tick], time-ordered.
    std::vector<Stamped<RadarSample>> radar_window;
    std::vector<ocular::CameraPoint> camera_window;

    bool operator==(const AlignedSnapshot&) const = default;
};

struct AlignerCounters {
    std::uint64_t ingested = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t late_drops = 0;
    std::uint64_t calibration_drops = 0;
    std::map<Source, std::uint64_t> accepted;

    bool operator==(const AlignerCounters&) const = default;
};

/// What ingest() did with one record. pending: held until its lane calibrates.
enum class IngestResult { accepted, pending, duplicate, late, ignored };

/// Buffers records from all sensor sources and emits one sample-and-hold
/// snapshot per grid tick once every live source has passed it.
///
/// Not thread-safe: one owner calls ingest/advance.
class Aligner {
public:
    explicit Aligner(GridConfig cfg = {});

    /// Accepts radar, wearable and camera records; other sources are ignored.
    IngestResult ingest(const TimedRecord& r);

    /// Emits every pending tick at or below the watermark derived from now_wall_ms.
    std::vector<AlignedSnapshot> advance(Millis now_wall_ms);

    /// End of input: calibrates what it can and emits up to the last data.
    std::vector<AlignedSnapshot> finish();

    const GridConfig& config() const noexcept { return cfg_; }
    const AlignerCounters& counters() const noexcept { return counters_; }
    std::map<Source, ClockModel> clocks() const;
    std::optional<Millis> watermark() const noexcept { return watermark_; }
    std::optional<Millis> latest_session_ts(Source s) const;
    /// Number of buffered (calibrated) records for a source, for inspection.
    std::size_t buffered(Source s) const;
    std::vector<Millis> buffered_ts(Source s) const;

private:
    struct Entry {
        std::int64_t seq;
        Payload payload;
    };
    using Key = std::pair<Millis, std::int64_t>; // (session ts, seq)

    struct Lane {
        Source source;
        ClockModel clock;
        std::set<std::int64_t> seen;
        std::map<std::int64_t, TimedRecord> pending; // by seq, awaiting calibration
        std::map<Key, Payload> records;
        std::optional<Millis> latest_ts;
        Millis latest_wall_ms = 0;
        std::optional<Millis> unwrap_ref; // radar u32 unwrapping reference
    };

    Lane& lane(Source s);
    Millis session_ts(Lane& l, const TimedRecord& r);
    bool insert_calibrated(Lane& l, const TimedRecord& r);
    void try_calibrate(Lane& l, bool force, Millis now_wall_ms);
    std::optional<Millis> compute_watermark(std::optional<Millis> cap) const;
    std::vector<AlignedSnapshot> emit_through(Millis watermark);
    AlignedSnapshot snapshot_at(Millis tick) const;
    void prune(Millis next_tick);

    GridConfig cfg_;
    std::map<Source, Lane> lanes_;
    AlignerCounters counters_;
    std::optional<Millis> watermark_;
    std::optional<Millis> next_tick_;
};

/// Sequential source of records, e.g. a per-device log file.
class RecordReader {
public:
    virtual ~RecordReader() = default;
    virtual std::string name() const = 0;
    /// Throws ReplayError when the underlying file cannot be read.
    virtual std::vector<TimedRecord> read_all() = 0;
};

/// JSON-lines dump of TimedRecords (one encoded record per line).
class JsonLinesReader final : public RecordReader {
public:
    explicit JsonLinesReader(std::string path) : path_(std::move(path)) {}
    std::string name() const override { return path_; }
    std::vector<TimedRecord> read_all() override;

private:
    std::string path_;
};

/// Offline mode: merges all readers by wall time and drives an Aligner the
/// same way the live collector does (now = max wall time seen).
void replay_logs(std::span<RecordReader* const> readers, const GridConfig& cfg,
                 const std::function<void(const AlignedSnapshot&)>& sink);

std::vector<AlignedSnapshot> replay_logs(std::span<RecordReader* const> readers, const GridConfig& cfg = {});

/// Orders records the way the live pipeline consumes them from a simulator.
void sort_for_replay(std::vector<TimedRecord>& records);

} // namespace cabin::align
