#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cabin/collector/config.hpp"
#include "cabin/collector/pipeline.hpp"
#include "cabin/collector/stream.hpp"
#include "cabin/persist/csv.hpp"
#include "cabin/persist/store.hpp"
#include "cabin/radar/codec.hpp"
#include "cabin/transport/bus.hpp"
#include "cabin/transport/bytes.hpp"
#include "cabin/transport/clock.hpp"

namespace cabin::mqtt {
class Client;
}

namespace cabin::collector {

enum class Lifecycle { idle, running, stopping, closed };
std::string_view to_string(Lifecycle s) noexcept;

/// 26-character Crockford base32: 48-bit millisecond time, 80 random bits.
/// Lexicographic order follows creation time.
std::string make_ulid(Millis epoch_ms, std::mt19937_64& rng);

struct StartRequest {
    std::optional<std::string> subject_pseudo_id;
    std::optional<std::vector<DeviceInfo>> devices;
};

struct WarningEpisode {
    WarningLevel level = WarningLevel::drowsy_warning;
    Millis start_ms = 0;
    Millis end_ms = 0; // last tick of the episode

    bool operator==(const WarningEpisode&) const = default;
};

struct SourceSummary {
    std::uint64_t records = 0; // accepted into the store
    Freshness freshness;
    std::optional<Millis> last_wall_ms;

    bool operator==(const SourceSummary&) const = default;
};

struct SessionSummary {
    std::string session_id;
    std::uint64_t rows = 0;
    std::map<Source, SourceSummary> sources;
    std::uint64_t late_drops = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t calibration_drops = 0;
    std::uint64_t frames_bad_checksum = 0;
    std::uint64_t bytes_skipped = 0;
    std::uint64_t decode_errors = 0;
    std::vector<WarningEpisode> warnings;
    std::vector<Annotation> annotations;
    std::map<Source, align::ClockModel> clocks;
    std::string csv_path;
    std::string store_path;
    std::string meta_path;
};

nlohmann::json summary_to_json(const SessionSummary& s);

/// Transports supplied by the host. Anything left null is built from the
/// config (system or scaled clock, MQTT client, TCP/serial/file radar).
struct CollectorIo {
    transport::Clock* clock = nullptr;
    transport::MessageBus* bus = nullptr;
    transport::ByteSource* radar = nullptr;
};

/// Session lifecycle, ingestion and fan-out around one Pipeline per session.
/// Ingestion callbacks only enqueue; a single pipeline thread owns alignment,
/// fusion and the CSV/store writes.
class Collector {
public:
    /// Throws ConfigError, or TransportError when a configured broker is down.
    explicit Collector(CollectorConfig cfg, CollectorIo io = {});
    ~Collector();

    Collector(const Collector&) = delete;
    Collector& operator=(const Collector&) = delete;

    /// Throws StateError when a session is active, ConfigError without sources.
    std::string start_session(const StartRequest& req = {});
    /// A zero ts_ms is stamped with the collector clock. Throws StateError,
    /// NotFoundError or ValidationError.
    void annotate(const std::string& session_id, Annotation a);
    /// Throws NotFoundError unless session_id is the running session.
    SessionSummary stop_session(const std::string& session_id);

    nlohmann::json status() const;
    std::shared_ptr<StreamSubscription> subscribe();

    /// Blocks until every record enqueued so far has been processed.
    void drain();

    Lifecycle state() const;
    std::optional<std::string> session_id() const;
    const CollectorConfig& config() const noexcept { return cfg_; }
    persist::JsonLinesStore& store() noexcept { return *store_; }
    transport::Clock& clock() noexcept { return *clock_; }

private:
    struct StopToken {};
    using Item = std::variant<TimedRecord, StopToken>;

    void enqueue(TimedRecord r);
    void on_radar_bytes(std::span<const std::uint8_t> bytes);
    void on_bus_message(Source expected, const std::string& payload);
    void start_ingestion();
    void stop_ingestion();
    void pipeline_main();
    void emit(const std::vector<FusedRow>& rows);
    void publish_status_locked();
    void flush_outbox();
    transport::MessageBus* bus_for(Source s) const;
    nlohmann::json status_locked() const;
    SessionSummary summary_locked() const;
    void write_meta() const;

    CollectorConfig cfg_;
    std::unique_ptr<transport::Clock> owned_clock_;
    std::unique_ptr<mqtt::Client> owned_mqtt_;
    std::unique_ptr<transport::ByteSource> owned_radar_;
    transport::Clock* clock_ = nullptr;
    transport::MessageBus* inproc_bus_ = nullptr;
    transport::MessageBus* fused_bus_ = nullptr;
    transport::ByteSource* radar_ = nullptr;
    std::unique_ptr<persist::JsonLinesStore> store_;
    StreamHub hub_;
    std::mt19937_64 rng_;

    // Session state, guarded by state_mutex_.
    mutable std::mutex state_mutex_;
    Lifecycle state_ = Lifecycle::idle;
    SessionMeta meta_;
    std::unique_ptr<Pipeline> pipeline_;
    std::unique_ptr<std::ofstream> csv_file_;
    std::unique_ptr<persist::CsvWriter> csv_;
    std::uint64_t rows_ = 0;
    std::uint64_t fused_seq_ = 0;
    std::uint64_t annotation_seq_ = 0;
    std::map<Source, SourceSummary> source_stats_;
    std::vector<WarningEpisode> episodes_;
    std::optional<FusedRow> last_row_;
    std::optional<SessionSummary> last_summary_;
    std::uint64_t sink_errors_ = 0;
    std::string last_sink_error_;

    // Ingestion state.
    std::mutex radar_mutex_;
    radar::StreamDecoder decoder_;
    std::int64_t radar_seq_ = 0;
    std::atomic<std::uint64_t> decode_errors_{0};
    std::map<Source, Millis> last_seen_wall_; // guarded by queue_mutex_
    std::vector<std::pair<transport::MessageBus*, std::uint64_t>> bus_tokens_;
    std::vector<std::pair<std::string, std::string>> outbox_; // pipeline thread only

    // Work queue.
    mutable std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::condition_variable drained_cv_;
    std::deque<Item> queue_;
    bool accepting_ = false;
    std::uint64_t enqueued_ = 0;
    std::uint64_t processed_ = 0;
    std::string active_session_; // guarded by queue_mutex_
    std::thread worker_;
};

} // namespace cabin::collector
