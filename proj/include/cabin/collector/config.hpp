#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cabin/align/aligner.hpp"
#include "cabin/core/model.hpp"
#include "cabin/fusion/fusion.hpp"

namespace cabin::collector {

struct RadarSourceConfig {
    std::string kind = "tcp"; // tcp | serial | file | inproc
    std::string listen = "127.0.0.1:7001";
    std::string path;         // serial device or byte dump
    int baud = 115200;
    std::size_t chunk_bytes = 4096; // file only
    int pace_ms = 0;                // file only

    bool operator==(const RadarSourceConfig&) const = default;
};

struct BusSourceConfig {
    std::string kind = "mqtt"; // mqtt | inproc
    std::string topic;         // subscription filter

    bool operator==(const BusSourceConfig&) const = default;
};

struct SourcesConfig {
    std::optional<RadarSourceConfig> radar;
    std::optional<BusSourceConfig> wearable;
    std::optional<BusSourceConfig> camera;

    bool operator==(const SourcesConfig&) const = default;
};

struct MqttConfig {
    std::string url = "mqtt://127.0.0.1:1883";
    std::string client_id = "cabin-collector";
    std::uint16_t keepalive_s = 30;
    bool publish_fused = true;

    bool operator==(const MqttConfig&) const = default;
};

struct ApiConfig {
    std::string bind = "127.0.0.1";
    std::uint16_t port = 8080;

    bool operator==(const ApiConfig&) const = default;
};

struct ClockConfig {
    std::string mode = "system"; // system | scaled
    double speed = 1.0;
    std::optional<Millis> epoch_ms;

    bool operator==(const ClockConfig&) const = default;
};

struct SessionDefaults {
    std::string subject_pseudo_id = "anonymous";
    std::vector<DeviceInfo> devices;

    bool operator==(const SessionDefaults&) const = default;
};

struct CollectorConfig {
    SourcesConfig sources;
    std::optional<MqttConfig> mqtt;
    align::GridConfig grid;
    fusion::FusionConfig fusion;
    std::string storage_dir = "sessions";
    ApiConfig api;
    ClockConfig clock;
    SessionDefaults session_defaults;
    std::size_t stream_queue_limit = 1024;
    bool publish_fused_inproc = true; // echo fused rows on an in-process bus

    std::size_t enabled_sources() const;
    /// Throws ConfigError. Source presence is checked separately because a
    /// collector may be configured before its devices are known.
    void validate(bool require_source = true) const;
};

/// Unknown keys are rejected so typos surface. Throws ConfigError.
CollectorConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const CollectorConfig& c);
CollectorConfig load_config(const std::string& path);

/// CABIN_CONFIG wins over the command-line path. Throws ConfigError when
/// neither is given.
std::string resolve_config_path(const std::optional<std::string>& cli_path);

/// Config for a hermetic collector fed by in-process transports.
CollectorConfig inproc_config(std::string storage_dir);

} // namespace cabin::collector
