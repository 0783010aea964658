#include "cabin/align/aligner.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "cabin/core/errors.hpp"
#include "cabin/core/wire.hpp"

namespace cabin::align {

namespace {

constexpr Millis kWrap = Millis{1} << 32;

bool is_sensor(Source s) { return s == Source::radar || s == Source::wearable || s == Source::camera; }

Millis floor_div(Millis a, Millis b) {
    Millis q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

/// Picks the representative of value modulo 2^32 closest to ref.
Millis unwrap_near(Millis value, Millis ref) {
    Millis k = floor_div(ref - value + kWrap / 2, kWrap);
    return value + k * kWrap;
}

/// Integer median; the even case takes the floor of the middle pair's mean.
Millis median_floor(std::vector<Millis> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    if (v.size() % 2 == 1) return v[m];
    return floor_div(v[m - 1] + v[m], 2);
}

int source_rank(Source s) { return static_cast<int>(s); }

} // namespace

ClockModel calibrate(Source source, std::span<const TimedRecord> first_records, std::size_t n) {
    std::vector<const TimedRecord*> recs;
    for (const auto& r : first_records) recs.push_back(&r);
    std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->seq < b->seq; });
    if (recs.size() > n) recs.resize(n);
    if (recs.size() < kMinCalibrationRecords) {
        throw CalibrationError("calibration of " + std::string(to_string(source)) + " needs at least " +
                               std::to_string(kMinCalibrationRecords) + " records, got " +
                               std::to_string(recs.size()));
    }

    std::vector<Millis> diffs;
    diffs.reserve(recs.size());
    std::optional<Millis> prev;
    for (const auto* r : recs) {
        Millis device = r->device_ts_ms;
        if (source == Source::radar) {
            if (prev) device = unwrap_near(device, *prev);
            prev = device;
        }
        diffs.push_back(r->wall_ts_ms - device);
    }

    ClockModel m;
    m.source = source;
    m.offset_ms = median_floor(diffs);
    std::vector<Millis> dev;
    dev.reserve(diffs.size());
    for (Millis d : diffs) dev.push_back(d >= m.offset_ms ? d - m.offset_ms : m.offset_ms - d);
    m.residual_ms = median_floor(dev);
    m.calibrated = true;
    return m;
}

Millis GridConfig::staleness(Source s) const {
    auto it = staleness_ms.find(s);
    return it == staleness_ms.end() ? 0 : it->second;
}

void GridConfig::validate() const {
    if (step_ms <= 0) throw ValidationError("grid step_ms must be positive");
    if (lateness_ms < 0) throw ValidationError("grid lateness_ms must be non-negative");
    for (auto s : kSensorSources) {
        if (staleness(s) <= 0) throw ValidationError("staleness for " + std::string(to_string(s)) + " must be positive");
    }
    if (radar_window_ms <= 0 || camera_window_ms <= 0) throw ValidationError("trailing windows must be positive");
    if (calibration_records < kMinCalibrationRecords) throw ValidationError("calibration needs at least 5 records");
}

Aligner::Aligner(GridConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

Aligner::Lane& Aligner::lane(Source s) {
    auto it = lanes_.find(s);
    if (it == lanes_.end()) {
        it = lanes_.emplace(s, Lane{}).first;
        it->second.source = s;
        it->second.clock.source = s;
    }
    return it->second;
}

Millis Aligner::session_ts(Lane& l, const TimedRecord& r) {
    Millis device = r.device_ts_ms;
    if (l.source == Source::radar) {
        if (l.unwrap_ref) device = unwrap_near(device, *l.unwrap_ref);
        if (!l.unwrap_ref || device > *l.unwrap_ref) l.unwrap_ref = device;
    }
    return device + l.clock.offset_ms;
}

IngestResult Aligner::ingest(const TimedRecord& r) {
    if (!is_sensor(r.source)) return IngestResult::ignored;
    ++counters_.ingested;
    Lane& l = lane(r.source);
    if (!l.seen.insert(r.seq).second) {
        ++counters_.duplicates;
        return IngestResult::duplicate;
    }
    l.latest_wall_ms = std::max(l.latest_wall_ms, r.wall_ts_ms);
    if (!l.clock.calibrated) {
        l.pending.emplace(r.seq, r);
        try_calibrate(l, false, 0);
        return IngestResult::pending;
    }
    return insert_calibrated(l, r) ? IngestResult::accepted : IngestResult::late;
}

bool Aligner::insert_calibrated(Lane& l, const TimedRecord& r) {
    const Millis ts = session_ts(l, r);
    if (watermark_ && ts < *watermark_ - cfg_.staleness(l.source)) {
        ++counters_.late_drops;
        return false;
    }
    l.records.emplace(Key{ts, r.seq}, r.payload);
    if (!l.latest_ts || ts > *l.latest_ts) l.latest_ts = ts;
    ++counters_.accepted[l.source];
    return true;
}

void Aligner::try_calibrate(Lane& l, bool force, Millis) {
    if (l.pending.empty()) return;
    const std::size_t n = cfg_.calibration_records;

    // The first n sequence numbers are all present, or enough has piled up
    // that waiting longer cannot help.
    const bool head_complete = l.pending.begin()->first == 0 && l.pending.size() >= n &&
                               std::next(l.pending.begin(), static_cast<std::ptrdiff_t>(n - 1))->first ==
                                   static_cast<std::int64_t>(n - 1);
    const bool overflow = l.pending.size() >= 2 * n;
    const bool forced = force && l.pending.size() >= kMinCalibrationRecords;
    if (!head_complete && !overflow && !forced) {
        if (force) {
            counters_.calibration_drops += l.pending.size();
            l.pending.clear();
        }
        return;
    }

    std::vector<TimedRecord> set;
    for (const auto& [seq, rec] : l.pending) {
        if (set.size() == n) break;
        set.push_back(rec);
    }
    l.clock = calibrate(l.source, set, n);

    // Unwrap reference for the radar starts at the earliest calibration record.
    l.unwrap_ref.reset();
    auto pending = std::move(l.pending);
    l.pending.clear();
    for (const auto& [seq, rec] : pending) insert_calibrated(l, rec);
}

std::optional<Millis> Aligner::compute_watermark(std::optional<Millis> cap) const {
    std::optional<Millis> wm;
    bool any_calibrated = false;
    for (const auto& [src, l] : lanes_) {
        if (!l.pending.empty()) return std::nullopt; // every ingesting source must be calibrated first
        if (!l.clock.calibrated || !l.latest_ts) continue;
        any_calibrated = true;
        if (cap && *cap - *l.latest_ts > cfg_.staleness(src)) continue; // silent source escapes
        wm = wm ? std::min(*wm, *l.latest_ts) : *l.latest_ts;
    }
    if (!any_calibrated) return std::nullopt;
    if (!wm) return cap;
    if (cap) wm = std::min(*wm, *cap);
    return wm;
}

std::vector<AlignedSnapshot> Aligner::advance(Millis now_wall_ms) {
    const Millis cap = now_wall_ms - cfg_.lateness_ms;
    for (auto& [src, l] : lanes_) {
        if (!l.pending.empty() && cap - l.latest_wall_ms > cfg_.staleness(src)) try_calibrate(l, true, now_wall_ms);
    }
    auto wm = compute_watermark(cap);
    if (!wm) return {};
    return emit_through(*wm);
}

std::vector<AlignedSnapshot> Aligner::finish() {
    for (auto& [src, l] : lanes_) try_calibrate(l, true, 0);
    std::optional<Millis> last;
    for (const auto& [src, l] : lanes_) {
        if (l.latest_ts) last = last ? std::max(*last, *l.latest_ts) : *l.latest_ts;
    }
    if (!last) return {};
    auto wm = compute_watermark(last);
    if (!wm) return {};
    return emit_through(*wm);
}

std::vector<AlignedSnapshot> Aligner::emit_through(Millis wm) {
    std::vector<AlignedSnapshot> out;
    if (!next_tick_) {
        std::optional<Millis> anchor;
        for (const auto& [src, l] : lanes_) {
            if (!l.clock.calibrated || l.records.empty()) continue;
            const Millis first = l.records.begin()->first.first;
            anchor = anchor ? std::min(*anchor, first) : first;
        }
        if (!anchor) return out;
        next_tick_ = (floor_div(*anchor, cfg_.step_ms) + 1) * cfg_.step_ms;
    }
    while (*next_tick_ <= wm) {
        out.push_back(snapshot_at(*next_tick_));
        *next_tick_ += cfg_.step_ms;
    }
    if (!watermark_ || wm > *watermark_) watermark_ = wm;
    prune(*next_tick_);
    return out;
}

AlignedSnapshot Aligner::snapshot_at(Millis tick) const {
    AlignedSnapshot snap;
    snap.grid_ts_ms = tick;
    for (const auto& [src, l] : lanes_) {
        if (!l.clock.calibrated || l.records.empty()) continue;
        auto it = l.records.upper_bound(Key{tick, std::numeric_limits<std::int64_t>::max()});
        if (it != l.records.begin()) {
            auto held = std::prev(it);
            const Millis ts = held->first.first;
            const bool fresh = tick - ts <= cfg_.staleness(src);
            if (fresh) {
                switch (src) {
                case Source::radar:
                    snap.radar = Stamped<RadarSample>{ts, held->first.second, std::get<RadarSample>(held->second)};
                    snap.radar_fresh = true;
                    break;
                case Source::wearable:
                    snap.wearable =
                        Stamped<WearableSample>{ts, held->first.second, std::get<WearableSample>(held->second)};
                    snap.wearable_fresh = true;
                    break;
                case Source::camera:
                    snap.camera = Stamped<CameraSample>{ts, held->first.second, std::get<CameraSample>(held->second)};
                    snap.camera_fresh = true;
                    break;
                default: break;
                }
            }
        }
        if (src == Source::radar) {
            for (auto w = l.records.upper_bound(Key{tick - cfg_.radar_window_ms, std::numeric_limits<std::int64_t>::max()});
                 w != it; ++w) {
                snap.radar_window.push_back({w->first.first, w->first.second, std::get<RadarSample>(w->second)});
            }
        } else if (src == Source::camera) {
            for (auto w = l.records.upper_bound(Key{tick - cfg_.camera_window_ms, std::numeric_limits<std::int64_t>::max()});
                 w != it; ++w) {
                snap.camera_window.push_back({w->first.first, std::get<CameraSample>(w->second)});
            }
        }
    }
    return snap;
}

void Aligner::prune(Millis next_tick) {
    for (auto& [src, l] : lanes_) {
        Millis keep = cfg_.staleness(src);
        if (src == Source::radar) keep = std::max(keep, cfg_.radar_window_ms);
        if (src == Source::camera) keep = std::max(keep, cfg_.camera_window_ms);
        const Millis horizon = next_tick - keep - cfg_.step_ms;
        l.records.erase(l.records.begin(), l.records.lower_bound(Key{horizon, std::numeric_limits<std::int64_t>::min()}));
    }
}

std::map<Source, ClockModel> Aligner::clocks() const {
    std::map<Source, ClockModel> out;
    for (const auto& [src, l] : lanes_) {
        if (l.clock.calibrated) out.emplace(src, l.clock);
    }
    return out;
}

std::optional<Millis> Aligner::latest_session_ts(Source s) const {
    auto it = lanes_.find(s);
    if (it == lanes_.end()) return std::nullopt;
    return it->second.latest_ts;
}

std::size_t Aligner::buffered(Source s) const {
    auto it = lanes_.find(s);
    return it == lanes_.end() ? 0 : it->second.records.size();
}

std::vector<Millis> Aligner::buffered_ts(Source s) const {
    std::vector<Millis> out;
    auto it = lanes_.find(s);
    if (it == lanes_.end()) return out;
    for (const auto& [key, payload] : it->second.records) out.push_back(key.first);
    return out;
}

// ---- offline replay ---------------------------------------------------------

std::vector<TimedRecord> JsonLinesReader::read_all() {
    std::ifstream in(path_);
    if (!in) throw ReplayError("cannot open log '" + path_ + "'");
    std::vector<TimedRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(decode_record(line));
        } catch (const Error& e) {
            throw ReplayError(path_ + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (in.bad()) throw ReplayError("read failure on '" + path_ + "'");
    return out;
}

void sort_for_replay(std::vector<TimedRecord>& records) {
    std::stable_sort(records.begin(), records.end(), [](const TimedRecord& a, const TimedRecord& b) {
        if (a.wall_ts_ms != b.wall_ts_ms) return a.wall_ts_ms < b.wall_ts_ms;
        if (a.source != b.source) return source_rank(a.source) < source_rank(b.source);
        return a.seq < b.seq;
    });
}

void replay_logs(std::span<RecordReader* const> readers, const GridConfig& cfg,
                 const std::function<void(const AlignedSnapshot&)>& sink) {
    std::vector<TimedRecord> all;
    for (auto* reader : readers) {
        auto recs = reader->read_all();
        for (auto& r : recs) {
            if (is_sensor(r.source)) all.push_back(std::move(r));
        }
    }
    sort_for_replay(all);

    Aligner aligner(cfg);
    Millis now = std::numeric_limits<Millis>::min();
    for (const auto& r : all) {
        aligner.ingest(r);
        now = std::max(now, r.wall_ts_ms);
        for (const auto& snap : aligner.advance(now)) sink(snap);
    }
    for (const auto& snap : aligner.finish()) sink(snap);
}

std::vector<AlignedSnapshot> replay_logs(std::span<RecordReader* const> readers, const GridConfig& cfg) {
    std::vector<AlignedSnapshot> out;
    replay_logs(readers, cfg, [&](const AlignedSnapshot& s) { out.push_back(s); });
    return out;
}

} // namespace cabin::align
