#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cabin/core/model.hpp"

namespace cabin::ocular {

/// A camera sample placed on the session timeline.
struct CameraPoint {
    Millis ts_ms = 0;
    CameraSample sample;

    bool operator==(const CameraPoint&) const = default;
};

struct BlinkEvent {
    Millis close_ts_ms = 0;
    Millis reopen_ts_ms = 0;
    Millis duration_ms = 0;

    bool operator==(const BlinkEvent&) const = default;
};

struct NodEvent {
    Millis onset_ts_ms = 0;
    double drop_deg = 0.0;

    bool operator==(const NodEvent&) const = default;
};

struct CameraWeights {
    double perclos = 0.5;
    double long_blink = 0.3;
    double nod = 0.2;
};

struct MetricsWindowConfig {
    // PERCLOS: closure = 1 - aperture; P80 over 60 s by default, P70/60 s and
    // P80/30 s are the common variants.
    double perclos_threshold = 0.8;
    Millis perclos_window_ms = 60000;

    double blink_close_threshold = 0.8;
    double blink_reopen_threshold = 0.6;
    Millis long_blink_ms = 500;

    double gaze_yaw_limit_deg = 15.0;
    double gaze_pitch_limit_deg = 10.0;
    Millis distraction_dwell_ms = 2000;
    Millis attention_window_ms = 10000;

    double nod_drop_deg = 20.0;
    Millis nod_baseline_ms = 10000;
    Millis nod_recovery_ms = 3000;

    CameraWeights camera_weights;

    /// Throws ValidationError.
    void validate() const;
};

/// Time-weighted fraction of the window with closure >= threshold. Each
/// sample holds until the next one; the last sample holds until window_end.
/// Face-lost samples are excluded from numerator and denominator. Returns
/// nullopt when no face-visible time remains.
///
/// Throws ValidationError for fewer than two samples, unsorted input, a
/// sample after window_end, or a span longer than cfg.perclos_window_ms.
std::optional<double> perclos(std::span<const CameraPoint> samples, const MetricsWindowConfig& cfg,
                              Millis window_end_ms);

/// Hysteresis blink detector on closure. Events still open at the end of the
/// series are dropped, and a face-lost sample aborts an open event.
std::vector<BlinkEvent> detect_blinks(std::span<const CameraPoint> samples, const MetricsWindowConfig& cfg);

struct BlinkRates {
    double blink_rate_per_min = 0.0;
    double long_blink_rate_per_min = 0.0;

    bool operator==(const BlinkRates&) const = default;
};

BlinkRates blink_rates(std::span<const BlinkEvent> events, Millis window_ms, Millis long_blink_ms);

struct Attention {
    double fraction = 0.0; // time-weighted on-road share
    bool distraction_active = false;

    bool operator==(const Attention&) const = default;
};

/// On-road gaze share over [first sample, window_end]. Face-lost counts as
/// off-road. Returns nullopt for an empty series.
std::optional<Attention> attention(std::span<const CameraPoint> samples, const MetricsWindowConfig& cfg,
                                   Millis window_end_ms);

/// Downward head-pitch excursions below the trailing median that recover
/// within cfg.nod_recovery_ms.
std::vector<NodEvent> detect_nods(std::span<const CameraPoint> samples, const MetricsWindowConfig& cfg);

/// Weighted, saturating composite of PERCLOS, long-blink rate and nod rate.
double camera_drowsiness(double perclos, double long_blink_rate_per_min, double nod_rate_per_min,
                         const MetricsWindowConfig& cfg);

} // namespace cabin::ocular
