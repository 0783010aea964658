#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cabin/align/aligner.hpp"
#include "cabin/core/model.hpp"
#include "cabin/ocular/metrics.hpp"

namespace cabin::fusion {

struct ReliabilityConfig {
    Millis radar_distance_window_ms = 5000;
    double radar_distance_stddev_mm = 50.0;
    double radar_motion_fraction = 0.2;

    void validate() const;
};

struct WarningConfig {
    double warn_threshold = 0.6;
    double critical_threshold = 0.8;
    double clear_threshold = 0.5;
    Millis warn_sustain_ms = 10000;
    Millis clear_sustain_ms = 30000;
    double attention_threshold = 0.5;
    Millis attention_sustain_ms = 3000;
    double physio_weight = 0.6;
    double camera_weight = 0.4;

    void validate() const;
};

/// Warning state machine. Each accumulator holds how long its condition has
/// held over consecutive ticks carrying the input; absent inputs freeze it.
struct WarningState {
    WarningLevel current = WarningLevel::normal;
    Millis entered_at_ms = 0;
    std::optional<Millis> last_tick_ms;

    Millis above_warn_ms = 0;
    Millis above_critical_ms = 0;
    Millis below_clear_ms = 0;
    Millis low_attention_ms = 0;
    bool warn_run = false;
    bool critical_run = false;
    bool clear_run = false;
    bool low_attention_run = false;
    bool drowsiness_seen_last = false;
    bool attention_seen_last = false;

    bool operator==(const WarningState&) const = default;
};

/// Stable, present and motion-free radar over the trailing window. An empty
/// or single-sample window is unreliable.
bool radar_reliable(std::span<const align::Stamped<RadarSample>> window, const ReliabilityConfig& cfg);

struct ChannelSelection {
    std::optional<double> hr_bpm;
    std::optional<Source> hr_source;
    std::optional<double> rr_bpm;
    std::optional<Source> rr_source;
    std::optional<double> hrv_rmssd_ms;

    bool operator==(const ChannelSelection&) const = default;
};

/// HR prefers the wearable, RR prefers the radar; each falls back to the
/// other device when the preferred one is unusable.
ChannelSelection select_channels(const align::AlignedSnapshot& snapshot, bool radar_is_reliable);

/// Camera indicators evaluated on one snapshot's trailing buffer.
struct CameraMetrics {
    std::optional<double> perclos;
    std::optional<double> blink_rate_per_min;
    std::optional<double> long_blink_rate_per_min;
    std::optional<double> nod_rate_per_min;
    std::optional<double> attention;
    bool distraction_active = false;
    std::optional<double> drowsiness_camera;
};

CameraMetrics evaluate_camera(const align::AlignedSnapshot& snapshot, const ocular::MetricsWindowConfig& cfg);

/// Weighted mean of the present channels, renormalized when one is missing.
std::optional<double> drowsiness_index(std::optional<double> physio, std::optional<double> camera,
                                       const WarningConfig& cfg);

/// Throws ValidationError when grid_ts does not increase.
WarningState step_warning(const WarningState& state, std::optional<double> drowsiness,
                          std::optional<double> attention, bool distraction_active, Millis grid_ts_ms,
                          const WarningConfig& cfg);

struct FusionConfig {
    ReliabilityConfig reliability;
    WarningConfig warning;
    ocular::MetricsWindowConfig metrics;

    void validate() const;
    /// Trailing buffer lengths the aligner must keep for these settings.
    void apply_windows(align::GridConfig& grid) const;
};

struct FusionResult {
    FusedRow row;
    WarningState state;
};

FusionResult fuse_row(const align::AlignedSnapshot& snapshot, const CameraMetrics& metrics, bool radar_is_reliable,
                      const WarningState& state, const FusionConfig& cfg);

/// Snapshot-to-row stage with its warning state. Deterministic.
class FusionEngine {
public:
    explicit FusionEngine(FusionConfig cfg = {});

    FusedRow process(const align::AlignedSnapshot& snapshot);

    const WarningState& state() const noexcept { return state_; }
    const FusionConfig& config() const noexcept { return cfg_; }

private:
    FusionConfig cfg_;
    WarningState state_;
};

} // namespace cabin::fusion
