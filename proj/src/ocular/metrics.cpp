#include "cabin/ocular/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cabin/core/errors.hpp"

namespace cabin::ocular {

namespace {

void require_sorted(std::span<const CameraPoint> samples) {
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].ts_ms < samples[i - 1].ts_ms) throw ValidationError("camera samples are not time-sorted");
    }
}

bool has_eyes(const CameraSample& s) { return s.face_detected && s.aperture.has_value(); }

double closure(const CameraSample& s) { return 1.0 - *s.aperture; }

bool on_road(const CameraSample& s, const MetricsWindowConfig& cfg) {
    if (!s.face_detected || !s.gaze_yaw_deg || !s.gaze_pitch_deg) return false;
    return std::abs(*s.gaze_yaw_deg) <= cfg.gaze_yaw_limit_deg &&
           std::abs(*s.gaze_pitch_deg) <= cfg.gaze_pitch_limit_deg;
}

/// Duration sample i holds for: until the next sample, or window end for the last.
Millis held_for(std::span<const CameraPoint> samples, std::size_t i, Millis window_end_ms) {
    const Millis until = i + 1 < samples.size() ? samples[i + 1].ts_ms : window_end_ms;
    return until - samples[i].ts_ms;
}

double median_of(std::vector<double>& values) {
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    double hi = values[mid];
    if (values.size() % 2 == 1) return hi;
    double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double saturate(double value, double full_scale) { return std::clamp(value / full_scale, 0.0, 1.0); }

} // namespace

void MetricsWindowConfig::validate() const {
    auto fail = [](const char* what) { throw ValidationError(std::string("metrics config: ") + what); };
    if (!(perclos_threshold > 0.0 && perclos_threshold <= 1.0)) fail("perclos_threshold must be in (0, 1]");
    if (perclos_window_ms <= 0) fail("perclos_window_ms must be positive");
    if (!(blink_reopen_threshold > 0.0 && blink_reopen_threshold < blink_close_threshold &&
          blink_close_threshold <= 1.0)) {
        fail("blink thresholds must satisfy 0 < reopen < close <= 1");
    }
    if (long_blink_ms <= 0) fail("long_blink_ms must be positive");
    if (!(gaze_yaw_limit_deg > 0.0 && gaze_pitch_limit_deg > 0.0)) fail("gaze limits must be positive");
    if (distraction_dwell_ms <= 0 || attention_window_ms <= 0) fail("attention windows must be positive");
    if (!(nod_drop_deg > 0.0) || nod_baseline_ms <= 0 || nod_recovery_ms <= 0) fail("nod parameters must be positive");
    const auto& w = camera_weights;
    if (w.perclos < 0.0 || w.long_blink < 0.0 || w.nod < 0.0) fail("camera weights must be non-negative");
    if (std::abs(w.perclos + w.long_blink + w.nod - 1.0) > 1e-9) fail("camera weights must sum to 1");
}

std::optional<double> perclos(std::span<const CameraPoint> samples, const MetricsWindowConfig& cfg,
                              Millis window_end_ms) {
    if (samples.size() < 2) throw ValidationError("perclos needs at least two samples");
    require_sorted(samples);
    if (samples.back().ts_ms > window_end_ms) throw ValidationError("sample after window end");
    if (window_end_ms - samples.front().ts_ms > cfg.perclos_window_ms) {
        throw ValidationError("samples span more than one PERCLOS window");
    }

    Millis visible = 0;
    Millis closed = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i].sample;
        if (!has_eyes(s)) continue;
        const Millis d = held_for(samples, i, window_end_ms);
        visible += d;
        if (closure(s) >= cfg.perclos_threshold) closed += d;
    }
    if (visible <= 0) return std::nullopt;
    return static_cast<double>(closed) / static_cast<double>(visible);
}

std::vector<BlinkEvent> detect_blinks(std::span<const CameraPoint> samples, const MetricsWindowConfig& cfg) {
    require_sorted(samples);
    std::vector<BlinkEvent> events;
    std::optional<Millis> open_since;
    for (const auto& p : samples) {
        if (!has_eyes(p.sample)) {
            open_since.reset();
            continue;
        }
        const double c = closure(p.sample);
        if (!open_since) {
            if (c >= cfg.blink_close_threshold) open_since = p.ts_ms;
        } else if (c <= cfg.blink_reopen_threshold) {
            if (p.ts_ms > *open_since) events.push_back({*open_since, p.ts_ms, p.ts_ms - *open_since});
            open_since.reset();
        }
    }
    return events;
}

BlinkRates blink_rates(std::span<const BlinkEvent> events, Millis window_ms, Millis long_blink_ms) {
    if (window_ms <= 0) throw ValidationError("blink rate window must be positive");
    const auto long_count = std::count_if(events.begin(), events.end(),
                                          [&](const BlinkEvent& e) { return e.duration_ms >= long_blink_ms; });
    const double per_min = 60000.0 / static_cast<double>(window_ms);
    return {static_cast<double>(events.size()) * per_min, static_cast<double>(long_count) * per_min};
}

std::optional<Attention> attention(std::span<const CameraPoint> samples, const MetricsWindowConfig& cfg,
                                   Millis window_end_ms) {
    if (samples.empty()) return std::nullopt;
    require_sorted(samples);
    if (samples.back().ts_ms > window_end_ms) throw ValidationError("sample after window end");

    Millis total = 0;
    Millis looking = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Millis d = held_for(samples, i, window_end_ms);
        total += d;
        if (on_road(samples[i].sample, cfg)) looking += d;
    }

    Attention a;
    if (total > 0) {
        a.fraction = static_cast<double>(looking) / static_cast<double>(total);
    } else {
        a.fraction = on_road(samples.back().sample, cfg) ? 1.0 : 0.0;
    }

    // Trailing off-road dwell: from the first sample of the final off-road run.
    std::size_t run_start = samples.size();
    while (run_start > 0 && !on_road(samples[run_start - 1].sample, cfg)) --run_start;
    if (run_start < samples.size()) {
        a.distraction_active = window_end_ms - samples[run_start].ts_ms >= cfg.distraction_dwell_ms;
    }
    return a;
}

std::vector<NodEvent> detect_nods(std::span<const CameraPoint> samples, const MetricsWindowConfig& cfg) {
    require_sorted(samples);

    struct Excursion {
        Millis onset_ms;
        double baseline;
        double lowest;
    };

    std::vector<NodEvent> nods;
    std::optional<Excursion> ex;
    std::vector<double> history;
    std::size_t lo = 0; // first sample inside the trailing baseline window

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& p = samples[i];
        while (lo < i && samples[lo].ts_ms < p.ts_ms - cfg.nod_baseline_ms) ++lo;

        if (!p.sample.face_detected || !p.sample.head_pitch_deg) {
            ex.reset();
            continue;
        }
        const double pitch = *p.sample.head_pitch_deg;

        history.clear();
        for (std::size_t k = lo; k < i; ++k) {
            const auto& s = samples[k].sample;
            if (s.face_detected && s.head_pitch_deg) history.push_back(*s.head_pitch_deg);
        }
        std::optional<double> rolling;
        if (history.size() >= 3) rolling = median_of(history);

        if (!ex) {
            if (rolling && pitch <= *rolling - cfg.nod_drop_deg) ex = Excursion{p.ts_ms, *rolling, pitch};
            continue;
        }

        ex->lowest = std::min(ex->lowest, pitch);
        const bool within_bound = p.ts_ms - ex->onset_ms <= cfg.nod_recovery_ms;
        if (pitch > ex->baseline - cfg.nod_drop_deg) {
            if (within_bound) nods.push_back({ex->onset_ms, ex->baseline - ex->lowest});
            ex.reset();
        } else if (!within_bound && rolling && pitch > *rolling - cfg.nod_drop_deg) {
            // Head settled at a new level: not a nod, start over from the new baseline.
            ex.reset();
        }
    }
    return nods;
}

double camera_drowsiness(double perclos_value, double long_blink_rate_per_min, double nod_rate_per_min,
                         const MetricsWindowConfig& cfg) {
    const auto& w = cfg.camera_weights;
    const double d = w.perclos * saturate(perclos_value, 0.15) + w.long_blink * saturate(long_blink_rate_per_min, 6.0) +
                     w.nod * saturate(nod_rate_per_min, 3.0);
    return std::clamp(d, 0.0, 1.0);
}

} // namespace cabin::ocular
