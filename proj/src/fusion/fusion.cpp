#include "cabin/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "cabin/core/errors.hpp"

namespace cabin::fusion {

void ReliabilityConfig::validate() const {
    if (radar_distance_window_ms <= 0 || !(radar_distance_stddev_mm > 0.0) || !(radar_motion_fraction > 0.0)) {
        throw ValidationError("reliability thresholds must be positive");
    }
}

void WarningConfig::validate() const {
    if (!(clear_threshold < warn_threshold && warn_threshold < critical_threshold)) {
        throw ValidationError("warning thresholds must satisfy clear < warn < critical");
    }
    if (warn_sustain_ms < 0 || clear_sustain_ms < 0 || attention_sustain_ms < 0) {
        throw ValidationError("sustain durations must be non-negative");
    }
    if (physio_weight < 0.0 || camera_weight < 0.0 || std::abs(physio_weight + camera_weight - 1.0) > 1e-9) {
        throw ValidationError("physio and camera weights must be non-negative and sum to 1");
    }
}

void FusionConfig::validate() const {
    reliability.validate();
    warning.validate();
    metrics.validate();
}

void FusionConfig::apply_windows(align::GridConfig& grid) const {
    grid.radar_window_ms = reliability.radar_distance_window_ms;
    grid.camera_window_ms = std::max(metrics.perclos_window_ms, metrics.attention_window_ms) + metrics.nod_baseline_ms;
}

bool radar_reliable(std::span<const align::Stamped<RadarSample>> window, const ReliabilityConfig& cfg) {
    if (window.size() < 2) return false;
    const double n = static_cast<double>(window.size());
    double mean = 0.0;
    for (const auto& s : window) mean += s.sample.distance_mm;
    mean /= n;
    double var = 0.0;
    std::size_t moving = 0;
    for (const auto& s : window) {
        const double d = s.sample.distance_mm - mean;
        var += d * d;
        if (s.sample.motion) ++moving;
    }
    const double stddev = std::sqrt(var / n);
    return stddev <= cfg.radar_distance_stddev_mm && static_cast<double>(moving) / n <= cfg.radar_motion_fraction;
}

ChannelSelection select_channels(const align::AlignedSnapshot& snap, bool radar_is_reliable) {
    ChannelSelection sel;
    const WearableSample* wear = snap.wearable_fresh && snap.wearable && snap.wearable->sample.worn
                                     ? &snap.wearable->sample
                                     : nullptr;
    const RadarSample* radar = snap.radar_fresh && snap.radar && radar_is_reliable ? &snap.radar->sample : nullptr;

    if (wear && wear->hr_bpm) {
        sel.hr_bpm = wear->hr_bpm;
        sel.hr_source = Source::wearable;
    } else if (radar) {
        sel.hr_bpm = radar->hr_bpm;
        sel.hr_source = Source::radar;
    }

    if (radar) {
        sel.rr_bpm = radar->rr_bpm;
        sel.rr_source = Source::radar;
    } else if (wear && wear->rr_bpm) {
        sel.rr_bpm = wear->rr_bpm;
        sel.rr_source = Source::wearable;
    }

    if (wear) sel.hrv_rmssd_ms = wear->hrv_rmssd_ms;
    return sel;
}

CameraMetrics evaluate_camera(const align::AlignedSnapshot& snap, const ocular::MetricsWindowConfig& cfg) {
    CameraMetrics m;
    if (!snap.camera_fresh) return m;

    const Millis tick = snap.grid_ts_ms;
    std::span<const ocular::CameraPoint> all(snap.camera_window);
    auto tail = [&](Millis window_ms) {
        auto first = std::upper_bound(all.begin(), all.end(), tick - window_ms,
                                      [](Millis t, const ocular::CameraPoint& p) { return t < p.ts_ms; });
        return all.subspan(static_cast<std::size_t>(first - all.begin()));
    };

    auto perclos_span = tail(cfg.perclos_window_ms);
    if (perclos_span.size() >= 2) {
        m.perclos = ocular::perclos(perclos_span, cfg, tick);
        const auto blinks = ocular::detect_blinks(perclos_span, cfg);
        const auto rates = ocular::blink_rates(blinks, cfg.perclos_window_ms, cfg.long_blink_ms);
        m.blink_rate_per_min = rates.blink_rate_per_min;
        m.long_blink_rate_per_min = rates.long_blink_rate_per_min;

        const auto nods = ocular::detect_nods(all, cfg);
        const auto recent = std::count_if(nods.begin(), nods.end(), [&](const ocular::NodEvent& e) {
            return e.onset_ts_ms > tick - cfg.perclos_window_ms;
        });
        m.nod_rate_per_min = static_cast<double>(recent) * 60000.0 / static_cast<double>(cfg.perclos_window_ms);

        if (m.perclos) {
            m.drowsiness_camera =
                ocular::camera_drowsiness(*m.perclos, *m.long_blink_rate_per_min, *m.nod_rate_per_min, cfg);
        }
    }

    if (auto a = ocular::attention(tail(cfg.attention_window_ms), cfg, tick)) {
        m.attention = a->fraction;
        m.distraction_active = a->distraction_active;
    }
    return m;
}

std::optional<double> drowsiness_index(std::optional<double> physio, std::optional<double> camera,
                                       const WarningConfig& cfg) {
    if (physio && camera) return cfg.physio_weight * *physio + cfg.camera_weight * *camera;
    if (physio) return physio;
    return camera;
}

namespace {

/// Extends a run while its condition holds; a gap of absent ticks adds nothing.
void accumulate(Millis& acc, bool& run, bool cond, bool contiguous, Millis dt) {
    if (!cond) {
        acc = 0;
        run = false;
        return;
    }
    acc = run ? acc + (contiguous ? dt : 0) : 0;
    run = true;
}

bool drowsy_level(WarningLevel w) { return w == WarningLevel::drowsy_warning || w == WarningLevel::critical; }

} // namespace

WarningState step_warning(const WarningState& state, std::optional<double> drowsiness,
                          std::optional<double> attention, bool distraction_active, Millis grid_ts_ms,
                          const WarningConfig& cfg) {
    if (state.last_tick_ms && grid_ts_ms <= *state.last_tick_ms) {
        throw ValidationError("warning state machine requires increasing grid timestamps");
    }
    WarningState s = state;
    const Millis dt = state.last_tick_ms ? grid_ts_ms - *state.last_tick_ms : 0;

    if (drowsiness) {
        const double d = *drowsiness;
        const bool contiguous = state.drowsiness_seen_last;
        accumulate(s.above_warn_ms, s.warn_run, d >= cfg.warn_threshold, contiguous, dt);
        accumulate(s.above_critical_ms, s.critical_run, d >= cfg.critical_threshold, contiguous, dt);
        accumulate(s.below_clear_ms, s.clear_run, d <= cfg.clear_threshold, contiguous, dt);
    }
    s.drowsiness_seen_last = drowsiness.has_value();

    if (attention) {
        accumulate(s.low_attention_ms, s.low_attention_run, *attention < cfg.attention_threshold,
                   state.attention_seen_last, dt);
    }
    s.attention_seen_last = attention.has_value();

    const bool critical = s.critical_run && s.above_critical_ms >= cfg.warn_sustain_ms;
    const bool warn = s.warn_run && s.above_warn_ms >= cfg.warn_sustain_ms;
    const bool clear = s.clear_run && s.below_clear_ms >= cfg.clear_sustain_ms;
    const bool distracted =
        (attention && distraction_active) || (s.low_attention_run && s.low_attention_ms >= cfg.attention_sustain_ms);

    WarningLevel next = s.current;
    if (critical) {
        next = WarningLevel::critical;
    } else if (drowsy_level(s.current)) {
        if (clear) next = distracted ? WarningLevel::distraction_warning : WarningLevel::normal;
    } else if (warn) {
        next = WarningLevel::drowsy_warning;
    } else {
        next = distracted ? WarningLevel::distraction_warning : WarningLevel::normal;
    }

    if (!state.last_tick_ms || next != s.current) s.entered_at_ms = grid_ts_ms;
    s.current = next;
    s.last_tick_ms = grid_ts_ms;
    return s;
}

FusionResult fuse_row(const align::AlignedSnapshot& snap, const CameraMetrics& metrics, bool radar_is_reliable,
                      const WarningState& state, const FusionConfig& cfg) {
    auto q = [](std::optional<double> v) -> std::optional<double> {
        if (!v) return std::nullopt;
        return quantize4(*v);
    };

    FusedRow row;
    row.grid_ts_ms = snap.grid_ts_ms;

    const auto sel = select_channels(snap, radar_is_reliable);
    row.hr_bpm = q(sel.hr_bpm);
    row.hr_source = sel.hr_source;
    row.rr_bpm = q(sel.rr_bpm);
    row.rr_source = sel.rr_source;
    row.hrv_rmssd_ms = q(sel.hrv_rmssd_ms);

    const bool wearable_usable = snap.wearable_fresh && snap.wearable && snap.wearable->sample.worn;
    if (wearable_usable) row.drowsiness_physio = q(snap.wearable->sample.drowsiness_score);

    row.perclos = q(metrics.perclos);
    row.blink_rate_per_min = q(metrics.blink_rate_per_min);
    row.long_blink_rate_per_min = q(metrics.long_blink_rate_per_min);
    row.attention = q(metrics.attention);
    row.drowsiness_camera = q(metrics.drowsiness_camera);

    row.radar_reliable = snap.radar_fresh && radar_is_reliable;
    row.wearable_fresh = wearable_usable;
    row.camera_fresh = snap.camera_fresh;

    // The index is built from the row's own (quantized) channels so the
    // warning sequence can be re-derived from a CSV log.
    const auto index = drowsiness_index(row.drowsiness_physio, row.drowsiness_camera, cfg.warning);
    auto next = step_warning(state, index, row.attention, metrics.distraction_active, snap.grid_ts_ms, cfg.warning);
    row.warning = next.current;
    return {row, next};
}

FusionEngine::FusionEngine(FusionConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

FusedRow FusionEngine::process(const align::AlignedSnapshot& snapshot) {
    bool reliable = radar_reliable(snapshot.radar_window, cfg_.reliability);
    if (snapshot.radar && !snapshot.radar->sample.presence) reliable = false;
    auto metrics = evaluate_camera(snapshot, cfg_.metrics);
    auto result = fuse_row(snapshot, metrics, reliable, state_, cfg_);
    state_ = result.state;
    return result.row;
}

} // namespace cabin::fusion
