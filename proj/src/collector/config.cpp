#include "cabin/collector/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "cabin/core/errors.hpp"
#include "cabin/transport/socket.hpp"

namespace cabin::collector {

using nlohmann::json;

namespace {

/// Reads keys from one JSON object and rejects any it did not consume.
class Obj {
public:
    Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (!j_.contains(key)) return;
        used_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    template <typename T>
    void get(const char* key, std::optional<T>& out) {
        if (!j_.contains(key)) return;
        T v{};
        get(key, v);
        out = v;
    }

    std::optional<Obj> child(const char* key) {
        if (!j_.contains(key)) return std::nullopt;
        used_.insert(key);
        return Obj(j_.at(key), where_ + "." + key);
    }

    const json& raw() const { return j_; }

    const json* take(const char* key) {
        if (!j_.contains(key)) return nullptr;
        used_.insert(key);
        return &j_.at(key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!used_.count(k)) throw ConfigError("unknown key " + where_ + "." + k);
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

void read_radar(Obj o, RadarSourceConfig& r) {
    o.get("kind", r.kind);
    o.get("listen", r.listen);
    o.get("path", r.path);
    o.get("baud", r.baud);
    o.get("chunk_bytes", r.chunk_bytes);
    o.get("pace_ms", r.pace_ms);
    o.finish();
}

void read_bus(Obj o, BusSourceConfig& b) {
    o.get("kind", b.kind);
    o.get("topic", b.topic);
    o.finish();
}

void read_grid(Obj o, align::GridConfig& g) {
    o.get("step_ms", g.step_ms);
    o.get("lateness_ms", g.lateness_ms);
    o.get("calibration_records", g.calibration_records);
    if (auto st = o.child("staleness_ms")) {
        for (const auto& [name, v] : st->raw().items()) {
            Source s;
            try {
                s = parse_source(name);
            } catch (const Error&) {
                throw ConfigError("unknown source in grid.staleness_ms: " + name);
            }
            if (!v.is_number_integer()) throw ConfigError("grid.staleness_ms." + name + " must be an integer");
            g.staleness_ms[s] = v.get<Millis>();
        }
    }
    o.finish();
}

void read_metrics(Obj o, ocular::MetricsWindowConfig& m) {
    o.get("perclos_threshold", m.perclos_threshold);
    o.get("perclos_window_ms", m.perclos_window_ms);
    o.get("blink_close_threshold", m.blink_close_threshold);
    o.get("blink_reopen_threshold", m.blink_reopen_threshold);
    o.get("long_blink_ms", m.long_blink_ms);
    o.get("gaze_yaw_limit_deg", m.gaze_yaw_limit_deg);
    o.get("gaze_pitch_limit_deg", m.gaze_pitch_limit_deg);
    o.get("distraction_dwell_ms", m.distraction_dwell_ms);
    o.get("attention_window_ms", m.attention_window_ms);
    o.get("nod_drop_deg", m.nod_drop_deg);
    o.get("nod_baseline_ms", m.nod_baseline_ms);
    o.get("nod_recovery_ms", m.nod_recovery_ms);
    if (auto w = o.child("camera_weights")) {
        w->get("perclos", m.camera_weights.perclos);
        w->get("long_blink", m.camera_weights.long_blink);
        w->get("nod", m.camera_weights.nod);
        w->finish();
    }
    o.finish();
}

void read_reliability(Obj o, fusion::ReliabilityConfig& r) {
    o.get("radar_distance_window_ms", r.radar_distance_window_ms);
    o.get("radar_distance_stddev_mm", r.radar_distance_stddev_mm);
    o.get("radar_motion_fraction", r.radar_motion_fraction);
    o.finish();
}

void read_warning(Obj o, fusion::WarningConfig& w) {
    o.get("warn_threshold", w.warn_threshold);
    o.get("critical_threshold", w.critical_threshold);
    o.get("clear_threshold", w.clear_threshold);
    o.get("warn_sustain_ms", w.warn_sustain_ms);
    o.get("clear_sustain_ms", w.clear_sustain_ms);
    o.get("attention_threshold", w.attention_threshold);
    o.get("attention_sustain_ms", w.attention_sustain_ms);
    o.get("physio_weight", w.physio_weight);
    o.get("camera_weight", w.camera_weight);
    o.finish();
}

} // namespace

std::size_t CollectorConfig::enabled_sources() const {
    return (sources.radar ? 1 : 0) + (sources.wearable ? 1 : 0) + (sources.camera ? 1 : 0);
}

void CollectorConfig::validate(bool require_source) const {
    if (require_source && enabled_sources() == 0) throw ConfigError("no sources configured");
    if (sources.radar) {
        const auto& r = *sources.radar;
        if (r.kind == "tcp") {
            transport::parse_endpoint(r.listen);
        } else if (r.kind == "serial" || r.kind == "file") {
            if (r.path.empty()) throw ConfigError("radar " + r.kind + " source needs a path");
        } else if (r.kind != "inproc") {
            throw ConfigError("unknown radar source kind '" + r.kind + "'");
        }
    }
    for (const auto* b : {&sources.wearable, &sources.camera}) {
        if (!*b) continue;
        if ((*b)->kind == "mqtt") {
            if (!mqtt) throw ConfigError("MQTT source configured without an mqtt section");
        } else if ((*b)->kind != "inproc") {
            throw ConfigError("unknown bus source kind '" + (*b)->kind + "'");
        }
        if ((*b)->topic.empty()) throw ConfigError("bus source needs a topic filter");
    }
    if (mqtt) transport::parse_mqtt_url(mqtt->url);
    if (storage_dir.empty()) throw ConfigError("storage_dir must not be empty");
    if (clock.mode != "system" && clock.mode != "scaled") throw ConfigError("clock.mode must be system or scaled");
    if (!(clock.speed > 0.0)) throw ConfigError("clock.speed must be positive");
    if (stream_queue_limit == 0) throw ConfigError("stream_queue_limit must be positive");
    try {
        grid.validate();
        fusion.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
}

CollectorConfig config_from_json(const json& j) {
    CollectorConfig c;
    Obj root(j, "config");
    if (auto s = root.child("sources")) {
        if (auto r = s->child("radar")) {
            c.sources.radar.emplace();
            read_radar(*r, *c.sources.radar);
        }
        if (auto w = s->child("wearable")) {
            c.sources.wearable = BusSourceConfig{"mqtt", "cabin/+/wearable/data"};
            read_bus(*w, *c.sources.wearable);
        }
        if (auto cam = s->child("camera")) {
            c.sources.camera = BusSourceConfig{"mqtt", "cabin/+/camera/data"};
            read_bus(*cam, *c.sources.camera);
        }
        s->finish();
    }
    if (auto m = root.child("mqtt")) {
        c.mqtt.emplace();
        m->get("url", c.mqtt->url);
        m->get("client_id", c.mqtt->client_id);
        m->get("keepalive_s", c.mqtt->keepalive_s);
        m->get("publish_fused", c.mqtt->publish_fused);
        m->finish();
    }
    if (auto g = root.child("grid")) read_grid(*g, c.grid);
    if (auto m = root.child("metrics")) read_metrics(*m, c.fusion.metrics);
    if (auto r = root.child("reliability")) read_reliability(*r, c.fusion.reliability);
    if (auto w = root.child("warning")) read_warning(*w, c.fusion.warning);
    root.get("storage_dir", c.storage_dir);
    if (auto a = root.child("api")) {
        a->get("bind", c.api.bind);
        a->get("port", c.api.port);
        a->finish();
    }
    if (auto cl = root.child("clock")) {
        cl->get("mode", c.clock.mode);
        cl->get("speed", c.clock.speed);
        cl->get("epoch_ms", c.clock.epoch_ms);
        cl->finish();
    }
    if (auto d = root.child("session_defaults")) {
        d->get("subject_pseudo_id", c.session_defaults.subject_pseudo_id);
        if (const json* devs = d->take("devices")) {
            const auto& arr = *devs;
            if (!arr.is_array()) throw ConfigError("session_defaults.devices must be an array");
            for (const auto& dj : arr) {
                Obj o(dj, "session_defaults.devices[]");
                std::string source, model;
                o.get("source", source);
                o.get("model", model);
                o.finish();
                try {
                    c.session_defaults.devices.push_back({parse_source(source), model});
                } catch (const Error& e) {
                    throw ConfigError(std::string("session_defaults.devices: ") + e.what());
                }
            }
        }
        d->finish();
    }
    root.get("stream_queue_limit", c.stream_queue_limit);
    root.get("publish_fused_inproc", c.publish_fused_inproc);
    root.finish();
    c.fusion.apply_windows(c.grid);
    c.validate(false);
    return c;
}

json config_to_json(const CollectorConfig& c) {
    json j;
    json sources = json::object();
    if (c.sources.radar) {
        const auto& r = *c.sources.radar;
        sources["radar"] = {{"kind", r.kind}, {"listen", r.listen}, {"path", r.path},
                            {"baud", r.baud}, {"chunk_bytes", r.chunk_bytes}, {"pace_ms", r.pace_ms}};
    }
    if (c.sources.wearable) sources["wearable"] = {{"kind", c.sources.wearable->kind}, {"topic", c.sources.wearable->topic}};
    if (c.sources.camera) sources["camera"] = {{"kind", c.sources.camera->kind}, {"topic", c.sources.camera->topic}};
    j["sources"] = sources;
    if (c.mqtt) {
        j["mqtt"] = {{"url", c.mqtt->url},
                     {"client_id", c.mqtt->client_id},
                     {"keepalive_s", c.mqtt->keepalive_s},
                     {"publish_fused", c.mqtt->publish_fused}};
    }
    json stale = json::object();
    for (const auto& [s, v] : c.grid.staleness_ms) stale[std::string(to_string(s))] = v;
    j["grid"] = {{"step_ms", c.grid.step_ms},
                 {"lateness_ms", c.grid.lateness_ms},
                 {"calibration_records", c.grid.calibration_records},
                 {"staleness_ms", stale}};
    const auto& m = c.fusion.metrics;
    j["metrics"] = {{"perclos_threshold", m.perclos_threshold},
                    {"perclos_window_ms", m.perclos_window_ms},
                    {"blink_close_threshold", m.blink_close_threshold},
                    {"blink_reopen_threshold", m.blink_reopen_threshold},
                    {"long_blink_ms", m.long_blink_ms},
                    {"gaze_yaw_limit_deg", m.gaze_yaw_limit_deg},
                    {"gaze_pitch_limit_deg", m.gaze_pitch_limit_deg},
                    {"distraction_dwell_ms", m.distraction_dwell_ms},
                    {"attention_window_ms", m.attention_window_ms},
                    {"nod_drop_deg", m.nod_drop_deg},
                    {"nod_baseline_ms", m.nod_baseline_ms},
                    {"nod_recovery_ms", m.nod_recovery_ms},
                    {"camera_weights",
                     {{"perclos", m.camera_weights.perclos},
                      {"long_blink", m.camera_weights.long_blink},
                      {"nod", m.camera_weights.nod}}}};
    const auto& r = c.fusion.reliability;
    j["reliability"] = {{"radar_distance_window_ms", r.radar_distance_window_ms},
                        {"radar_distance_stddev_mm", r.radar_distance_stddev_mm},
                        {"radar_motion_fraction", r.radar_motion_fraction}};
    const auto& w = c.fusion.warning;
    j["warning"] = {{"warn_threshold", w.warn_threshold},         {"critical_threshold", w.critical_threshold},
                    {"clear_threshold", w.clear_threshold},       {"warn_sustain_ms", w.warn_sustain_ms},
                    {"clear_sustain_ms", w.clear_sustain_ms},     {"attention_threshold", w.attention_threshold},
                    {"attention_sustain_ms", w.attention_sustain_ms}, {"physio_weight", w.physio_weight},
                    {"camera_weight", w.camera_weight}};
    j["storage_dir"] = c.storage_dir;
    j["api"] = {{"bind", c.api.bind}, {"port", c.api.port}};
    j["clock"] = {{"mode", c.clock.mode}, {"speed", c.clock.speed}};
    if (c.clock.epoch_ms) j["clock"]["epoch_ms"] = *c.clock.epoch_ms;
    json devices = json::array();
    for (const auto& d : c.session_defaults.devices) {
        devices.push_back({{"source", std::string(to_string(d.source))}, {"model", d.model}});
    }
    j["session_defaults"] = {{"subject_pseudo_id", c.session_defaults.subject_pseudo_id}, {"devices", devices}};
    j["stream_queue_limit"] = c.stream_queue_limit;
    j["publish_fused_inproc"] = c.publish_fused_inproc;
    return j;
}

CollectorConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

std::string resolve_config_path(const std::optional<std::string>& cli_path) {
    if (const char* env = std::getenv("CABIN_CONFIG"); env && *env) return env;
    if (cli_path && !cli_path->empty()) return *cli_path;
    throw ConfigError("no config given (use --config or CABIN_CONFIG)");
}

CollectorConfig inproc_config(std::string storage_dir) {
    CollectorConfig c;
    c.sources.radar = RadarSourceConfig{"inproc", "", "", 115200, 4096, 0};
    c.sources.wearable = BusSourceConfig{"inproc", "cabin/+/wearable/data"};
    c.sources.camera = BusSourceConfig{"inproc", "cabin/+/camera/data"};
    c.storage_dir = std::move(storage_dir);
    c.fusion.apply_windows(c.grid);
    return c;
}

} // namespace cabin::collector
