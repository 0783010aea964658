#include "cabin/collector/service.hpp"

#include <filesystem>

#include "cabin/core/errors.hpp"
#include "cabin/core/wire.hpp"
#include "cabin/transport/mqtt.hpp"
#include "cabin/transport/socket.hpp"

namespace cabin::collector {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Lifecycle s) noexcept {
    switch (s) {
    case Lifecycle::idle: return "idle";
    case Lifecycle::running: return "running";
    case Lifecycle::stopping: return "stopping";
    case Lifecycle::closed: return "closed";
    }
    return "idle";
}

std::string make_ulid(Millis epoch_ms, std::mt19937_64& rng) {
    static constexpr char kAlphabet[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
    std::string out(26, '0');
    auto t = static_cast<std::uint64_t>(epoch_ms) & ((1ULL << 48) - 1);
    for (int i = 9; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kAlphabet[t & 31];
        t >>= 5;
    }
    // 80 random bits as 16 symbols.
    std::uint64_t hi = rng() & 0xFFFFULL;
    std::uint64_t lo = rng();
    for (int i = 25; i >= 10; --i) {
        out[static_cast<std::size_t>(i)] = kAlphabet[lo & 31];
        lo = (lo >> 5) | ((hi & 31) << 59);
        hi >>= 5;
    }
    return out;
}

json summary_to_json(const SessionSummary& s) {
    json sources = json::object();
    for (const auto& [src, st] : s.sources) {
        json js{{"records", st.records},
                {"fresh_rows", st.freshness.fresh_rows},
                {"stale_rows", st.freshness.stale_rows}};
        js["last_wall_ms"] = st.last_wall_ms ? json(*st.last_wall_ms) : json(nullptr);
        sources[std::string(to_string(src))] = js;
    }
    json warnings = json::array();
    for (const auto& w : s.warnings) {
        warnings.push_back({{"level", std::string(to_string(w.level))}, {"start_ms", w.start_ms}, {"end_ms", w.end_ms}});
    }
    json annotations = json::array();
    for (const auto& a : s.annotations) annotations.push_back(annotation_to_json(a));
    json clocks = json::object();
    for (const auto& [src, c] : s.clocks) {
        clocks[std::string(to_string(src))] = {{"offset_ms", c.offset_ms}, {"residual_ms", c.residual_ms}};
    }
    return {{"session_id", s.session_id},
            {"rows", s.rows},
            {"sources", sources},
            {"late_drops", s.late_drops},
            {"duplicates", s.duplicates},
            {"calibration_drops", s.calibration_drops},
            {"frames_bad_checksum", s.frames_bad_checksum},
            {"bytes_skipped", s.bytes_skipped},
            {"decode_errors", s.decode_errors},
            {"warnings", warnings},
            {"annotations", annotations},
            {"clocks", clocks},
            {"csv_path", s.csv_path},
            {"store_path", s.store_path},
            {"meta_path", s.meta_path}};
}

Collector::Collector(CollectorConfig cfg, CollectorIo io) : cfg_(std::move(cfg)), hub_(cfg_.stream_queue_limit) {
    cfg_.fusion.apply_windows(cfg_.grid);
    cfg_.validate(false);

    if (io.clock) {
        clock_ = io.clock;
    } else if (cfg_.clock.mode == "scaled") {
        const Millis epoch = cfg_.clock.epoch_ms ? *cfg_.clock.epoch_ms : transport::SystemClock{}.now_ms();
        owned_clock_ = std::make_unique<transport::ScaledClock>(epoch, cfg_.clock.speed);
        clock_ = owned_clock_.get();
    } else {
        owned_clock_ = std::make_unique<transport::SystemClock>();
        clock_ = owned_clock_.get();
    }

    inproc_bus_ = io.bus;
    const bool wants_mqtt = (cfg_.sources.wearable && cfg_.sources.wearable->kind == "mqtt") ||
                            (cfg_.sources.camera && cfg_.sources.camera->kind == "mqtt") ||
                            (cfg_.mqtt && cfg_.mqtt->publish_fused);
    if (wants_mqtt && cfg_.mqtt) {
        owned_mqtt_ = std::make_unique<mqtt::Client>(transport::parse_mqtt_url(cfg_.mqtt->url),
                                                     mqtt::ClientOptions{cfg_.mqtt->client_id, cfg_.mqtt->keepalive_s});
    }
    if (owned_mqtt_ && cfg_.mqtt->publish_fused) {
        fused_bus_ = owned_mqtt_.get();
    } else if (inproc_bus_ && cfg_.publish_fused_inproc) {
        fused_bus_ = inproc_bus_;
    }
    for (const auto* b : {&cfg_.sources.wearable, &cfg_.sources.camera}) {
        if (*b && (*b)->kind == "inproc" && !inproc_bus_) {
            throw ConfigError("in-process bus source configured but no bus supplied");
        }
    }

    if (cfg_.sources.radar) {
        const auto& r = *cfg_.sources.radar;
        if (r.kind == "inproc") {
            if (!io.radar) throw ConfigError("in-process radar configured but no byte source supplied");
            radar_ = io.radar;
        } else if (r.kind == "tcp") {
            owned_radar_ = std::make_unique<transport::TcpListenSource>(transport::parse_endpoint(r.listen));
        } else if (r.kind == "serial") {
            owned_radar_ = std::make_unique<transport::SerialSource>(r.path, r.baud);
        } else {
            owned_radar_ = std::make_unique<transport::FileSource>(r.path, r.chunk_bytes, r.pace_ms);
        }
        if (owned_radar_) radar_ = owned_radar_.get();
    }

    store_ = std::make_unique<persist::JsonLinesStore>(cfg_.storage_dir);
    rng_.seed(std::random_device{}());
}

Collector::~Collector() {
    std::optional<std::string> running;
    {
        std::lock_guard lock(state_mutex_);
        if (state_ == Lifecycle::running) running = meta_.session_id;
    }
    if (running) {
        try {
            stop_session(*running);
        } catch (...) {
        }
    }
    hub_.close_all();
}

transport::MessageBus* Collector::bus_for(Source s) const {
    const auto& src = s == Source::wearable ? cfg_.sources.wearable : cfg_.sources.camera;
    if (!src) return nullptr;
    return src->kind == "mqtt" ? static_cast<transport::MessageBus*>(owned_mqtt_.get()) : inproc_bus_;
}

std::string Collector::start_session(const StartRequest& req) {
    std::unique_lock lock(state_mutex_);
    if (state_ == Lifecycle::running || state_ == Lifecycle::stopping) {
        throw StateError("session " + meta_.session_id + " is already running");
    }
    cfg_.validate(true);

    const Millis now = clock_->now_ms();
    const std::string id = make_ulid(now, rng_);

    SessionMeta meta;
    meta.session_id = id;
    meta.subject_pseudo_id = req.subject_pseudo_id.value_or(cfg_.session_defaults.subject_pseudo_id);
    meta.started_at_ms = now;
    meta.devices = req.devices.value_or(cfg_.session_defaults.devices);

    const fs::path dir(cfg_.storage_dir);
    auto csv_file = std::make_unique<std::ofstream>(dir / (id + ".csv"), std::ios::binary | std::ios::trunc);
    if (!*csv_file) throw IoError("cannot create session log in '" + cfg_.storage_dir + "'");
    auto csv = std::make_unique<persist::CsvWriter>(*csv_file);
    store_->open_session(id);

    meta_ = std::move(meta);
    csv_file_ = std::move(csv_file);
    csv_ = std::move(csv);
    pipeline_ = std::make_unique<Pipeline>(cfg_.grid, cfg_.fusion);
    rows_ = 0;
    fused_seq_ = 0;
    annotation_seq_ = 0;
    source_stats_.clear();
    episodes_.clear();
    last_row_.reset();
    sink_errors_ = 0;
    last_sink_error_.clear();
    {
        std::lock_guard q(queue_mutex_);
        queue_.clear();
        accepting_ = true;
        active_session_ = id;
        enqueued_ = 0;
        processed_ = 0;
        last_seen_wall_.clear();
    }
    {
        std::lock_guard r(radar_mutex_);
        decoder_ = radar::StreamDecoder{};
        radar_seq_ = 0;
    }
    decode_errors_ = 0;
    write_meta();

    state_ = Lifecycle::running;
    worker_ = std::thread([this] { pipeline_main(); });
    lock.unlock();

    try {
        start_ingestion();
    } catch (...) {
        stop_ingestion();
        {
            std::lock_guard q(queue_mutex_);
            accepting_ = false;
            queue_.push_back(StopToken{});
            ++enqueued_;
            queue_cv_.notify_all();
        }
        worker_.join();
        std::lock_guard relock(state_mutex_);
        state_ = Lifecycle::idle;
        throw;
    }

    lock.lock();
    publish_status_locked();
    return id;
}

void Collector::start_ingestion() {
    if (radar_) radar_->start([this](std::span<const std::uint8_t> b) { on_radar_bytes(b); });
    for (Source s : {Source::wearable, Source::camera}) {
        auto* bus = bus_for(s);
        if (!bus) continue;
        const auto& topic = (s == Source::wearable ? cfg_.sources.wearable : cfg_.sources.camera)->topic;
        const auto token =
            bus->subscribe(topic, [this, s](const std::string&, const std::string& payload) { on_bus_message(s, payload); });
        bus_tokens_.emplace_back(bus, token);
    }
}

void Collector::stop_ingestion() {
    if (radar_) radar_->stop();
    for (auto [bus, token] : bus_tokens_) bus->unsubscribe(token);
    bus_tokens_.clear();
}

void Collector::enqueue(TimedRecord r) {
    std::lock_guard lock(queue_mutex_);
    if (!accepting_) return;
    r.session_id = active_session_;
    auto& seen = last_seen_wall_[r.source];
    seen = std::max(seen, r.wall_ts_ms);
    queue_.push_back(std::move(r));
    ++enqueued_;
    queue_cv_.notify_one();
}

void Collector::on_radar_bytes(std::span<const std::uint8_t> bytes) {
    std::lock_guard lock(radar_mutex_);
    const auto frames = decoder_.feed(bytes);
    if (frames.empty()) return;
    const Millis now = clock_->now_ms();
    for (const auto& f : frames) {
        try {
            validate(f);
        } catch (const ValidationError&) {
            ++decode_errors_;
            continue;
        }
        TimedRecord r;
        r.source = Source::radar;
        r.seq = radar_seq_++;
        r.device_ts_ms = f.device_ts;
        r.wall_ts_ms = now;
        r.payload = f;
        enqueue(std::move(r));
    }
}

void Collector::on_bus_message(Source expected, const std::string& payload) {
    TimedRecord r;
    try {
        r = decode_record(payload);
    } catch (const Error&) {
        ++decode_errors_;
        return;
    }
    if (r.source != expected) {
        ++decode_errors_;
        return;
    }
    enqueue(std::move(r));
}

void Collector::pipeline_main() {
    for (;;) {
        std::optional<Item> item;
        {
            std::unique_lock lock(queue_mutex_);
            if (clock_->manual()) {
                queue_cv_.wait(lock, [&] { return !queue_.empty(); });
            } else {
                queue_cv_.wait_for(lock, std::chrono::milliseconds(200), [&] { return !queue_.empty(); });
            }
            if (!queue_.empty()) {
                item = std::move(queue_.front());
                queue_.pop_front();
            }
        }

        bool stop = false;
        {
            std::lock_guard lock(state_mutex_);
            try {
                if (!item) {
                    // Quiet period on a real clock: let the grid catch up.
                    emit(pipeline_->idle(clock_->now_ms()));
                } else if (std::holds_alternative<StopToken>(*item)) {
                    emit(pipeline_->finish());
                    stop = true;
                } else {
                    const auto& rec = std::get<TimedRecord>(*item);
                    std::vector<FusedRow> rows;
                    if (pipeline_->ingest(rec, rows) == Pipeline::Outcome::accepted) {
                        store_->append(rec);
                        auto& st = source_stats_[rec.source];
                        ++st.records;
                        st.last_wall_ms = std::max(st.last_wall_ms.value_or(rec.wall_ts_ms), rec.wall_ts_ms);
                    }
                    emit(rows);
                }
            } catch (const Error& e) {
                ++sink_errors_;
                last_sink_error_ = e.what();
            }
        }
        flush_outbox();

        if (item) {
            std::lock_guard lock(queue_mutex_);
            ++processed_;
            drained_cv_.notify_all();
        }
        if (stop) return;
    }
}

void Collector::emit(const std::vector<FusedRow>& rows) {
    for (const auto& row : rows) {
        csv_->write(row);
        const auto rec = persist::fused_record(meta_.session_id, row, fused_seq_++, row.grid_ts_ms);
        store_->append(rec);
        ++rows_;

        const bool changed = !last_row_ || last_row_->warning != row.warning;
        if (row.warning != WarningLevel::normal) {
            if (changed || episodes_.empty()) {
                episodes_.push_back({row.warning, row.grid_ts_ms, row.grid_ts_ms});
            } else {
                episodes_.back().end_ms = row.grid_ts_ms;
            }
        }
        last_row_ = row;

        hub_.publish({"row", fused_row_to_json(row).dump()});
        if (changed) publish_status_locked();
        if (fused_bus_) outbox_.emplace_back(topic_for(meta_.session_id, Source::fused), encode_record(rec));
    }
}

void Collector::flush_outbox() {
    auto out = std::move(outbox_);
    outbox_.clear();
    for (const auto& [topic, payload] : out) {
        try {
            fused_bus_->publish(topic, payload);
        } catch (const Error& e) {
            std::lock_guard lock(state_mutex_);
            ++sink_errors_;
            last_sink_error_ = e.what();
        }
    }
}

void Collector::annotate(const std::string& session_id, Annotation a) {
    std::string topic, payload;
    {
        std::lock_guard lock(state_mutex_);
        if (state_ != Lifecycle::running) throw StateError("no session is running");
        if (session_id != meta_.session_id) throw NotFoundError("unknown session '" + session_id + "'");
        if (a.ts_ms == 0) a.ts_ms = clock_->now_ms();
        validate(a);

        TimedRecord rec;
        rec.session_id = meta_.session_id;
        rec.source = Source::annotation;
        rec.seq = static_cast<std::int64_t>(annotation_seq_++);
        rec.device_ts_ms = a.ts_ms;
        rec.wall_ts_ms = a.ts_ms;
        rec.payload = a;
        store_->append(rec);
        meta_.annotations.push_back(a);
        write_meta();

        hub_.publish({"annotation", annotation_to_json(a).dump()});
        if (fused_bus_) {
            topic = topic_for(meta_.session_id, Source::fused);
            payload = encode_record(rec);
        }
    }
    if (!topic.empty()) fused_bus_->publish(topic, payload);
}

SessionSummary Collector::stop_session(const std::string& session_id) {
    {
        std::lock_guard lock(state_mutex_);
        if (state_ != Lifecycle::running || session_id != meta_.session_id) {
            throw NotFoundError("no running session '" + session_id + "'");
        }
        state_ = Lifecycle::stopping;
        publish_status_locked();
    }

    stop_ingestion();
    {
        std::lock_guard q(queue_mutex_);
        accepting_ = false;
        queue_.push_back(StopToken{});
        ++enqueued_;
        queue_cv_.notify_all();
    }
    worker_.join();

    std::lock_guard lock(state_mutex_);
    try {
        csv_->flush();
    } catch (const IoError& e) {
        ++sink_errors_;
        last_sink_error_ = e.what();
    }
    csv_.reset();
    csv_file_.reset();
    meta_.ended_at_ms = clock_->now_ms();
    for (const auto& [src, c] : pipeline_->aligner().clocks()) meta_.clock_offset_ms[src] = c.offset_ms;
    write_meta();
    store_->close_session(meta_.session_id);

    auto summary = summary_locked();
    last_summary_ = summary;
    state_ = Lifecycle::closed;
    publish_status_locked();
    return summary;
}

SessionSummary Collector::summary_locked() const {
    SessionSummary s;
    s.session_id = meta_.session_id;
    s.rows = rows_;
    s.sources = source_stats_;
    const auto& fresh = pipeline_->freshness();
    for (Source src : kSensorSources) {
        auto it = fresh.find(src);
        if (it == fresh.end()) continue;
        s.sources[src].freshness = it->second;
    }
    const auto& c = pipeline_->aligner().counters();
    s.late_drops = c.late_drops;
    s.duplicates = c.duplicates;
    s.calibration_drops = c.calibration_drops;
    {
        std::lock_guard r(const_cast<std::mutex&>(radar_mutex_));
        s.frames_bad_checksum = decoder_.counters().frames_bad_checksum;
        s.bytes_skipped = decoder_.counters().bytes_skipped;
    }
    s.decode_errors = decode_errors_;
    s.warnings = episodes_;
    s.annotations = meta_.annotations;
    s.clocks = pipeline_->aligner().clocks();
    const fs::path dir(cfg_.storage_dir);
    s.csv_path = (dir / (meta_.session_id + ".csv")).string();
    s.store_path = store_->path_for(meta_.session_id).string();
    s.meta_path = (dir / (meta_.session_id + ".meta.json")).string();
    return s;
}

void Collector::write_meta() const {
    const auto path = fs::path(cfg_.storage_dir) / (meta_.session_id + ".meta.json");
    std::ofstream out(path, std::ios::trunc);
    out << session_meta_to_json(meta_).dump(2) << '\n';
    if (!out) throw IoError("cannot write '" + path.string() + "'");
}

json Collector::status_locked() const {
    json j;
    j["state"] = std::string(to_string(state_));
    if (state_ == Lifecycle::idle) {
        j["sources"] = json::object();
        return j;
    }
    j["session_id"] = meta_.session_id;
    j["started_at"] = meta_.started_at_ms;

    const Millis now = clock_->now_ms();
    std::map<Source, Millis> seen;
    {
        std::lock_guard q(queue_mutex_);
        seen = last_seen_wall_;
    }
    const auto& last_fresh = pipeline_->last_fresh();
    json sources = json::object();
    const std::pair<Source, bool> configured[] = {{Source::radar, cfg_.sources.radar.has_value()},
                                                  {Source::wearable, cfg_.sources.wearable.has_value()},
                                                  {Source::camera, cfg_.sources.camera.has_value()}};
    for (const auto& [src, enabled] : configured) {
        if (!enabled) continue;
        json js;
        auto it = seen.find(src);
        js["last_seen_age_ms"] = it == seen.end() ? json(nullptr) : json(now - it->second);
        auto st = source_stats_.find(src);
        js["records"] = st == source_stats_.end() ? 0 : st->second.records;
        auto f = last_fresh.find(src);
        js["fresh"] = f != last_fresh.end() && f->second;
        if (src == Source::radar) js["radar_reliable"] = last_row_ && last_row_->radar_reliable;
        if (src == Source::wearable) js["worn_fresh"] = last_row_ && last_row_->wearable_fresh;
        sources[std::string(to_string(src))] = js;
    }
    j["sources"] = sources;
    j["warning"] = std::string(to_string(last_row_ ? last_row_->warning : WarningLevel::normal));
    j["last_row"] = last_row_ ? fused_row_to_json(*last_row_) : json(nullptr);

    const auto& c = pipeline_->aligner().counters();
    radar::DecoderCounters dc;
    {
        std::lock_guard r(const_cast<std::mutex&>(radar_mutex_));
        dc = decoder_.counters();
    }
    j["counters"] = {{"rows", rows_},
                     {"late_drops", c.late_drops},
                     {"duplicates", c.duplicates},
                     {"calibration_drops", c.calibration_drops},
                     {"frames_bad_checksum", dc.frames_bad_checksum},
                     {"bytes_skipped", dc.bytes_skipped},
                     {"decode_errors", decode_errors_.load()},
                     {"sink_errors", sink_errors_},
                     {"annotations", meta_.annotations.size()}};
    if (!last_sink_error_.empty()) j["last_sink_error"] = last_sink_error_;
    if (state_ == Lifecycle::closed && last_summary_) j["summary"] = summary_to_json(*last_summary_);
    return j;
}

json Collector::status() const {
    std::lock_guard lock(state_mutex_);
    return status_locked();
}

void Collector::publish_status_locked() { hub_.publish({"status", status_locked().dump()}); }

std::shared_ptr<StreamSubscription> Collector::subscribe() {
    std::lock_guard lock(state_mutex_);
    return hub_.subscribe({"status", status_locked().dump()});
}

void Collector::drain() {
    std::unique_lock lock(queue_mutex_);
    drained_cv_.wait(lock, [&] { return processed_ >= enqueued_; });
}

Lifecycle Collector::state() const {
    std::lock_guard lock(state_mutex_);
    return state_;
}

std::optional<std::string> Collector::session_id() const {
    std::lock_guard lock(state_mutex_);
    if (state_ == Lifecycle::idle) return std::nullopt;
    return meta_.session_id;
}

} // namespace cabin::collector
