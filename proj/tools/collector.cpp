#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cabin/collector/api.hpp"
#include "cabin/collector/config.hpp"
#include "cabin/collector/pipeline.hpp"
#include "cabin/collector/service.hpp"
#include "cabin/collector/simulate.hpp"
#include "cabin/core/errors.hpp"
#include "cabin/core/wire.hpp"
#include "cabin/persist/store.hpp"
#include "cabin/sim/scenario.hpp"
#include "cabin/transport/clock.hpp"
#include "cabin/transport/mqtt.hpp"
#include "cabin/transport/socket.hpp"

namespace fs = std::filesystem;
using namespace cabin;

namespace {

sigset_t block_termination() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

void wait_for_termination(const sigset_t& set) {
    int sig = 0;
    sigwait(&set, &sig);
}

collector::CollectorConfig config_or_default(const std::optional<std::string>& path) {
    if (path || std::getenv("CABIN_CONFIG")) return collector::load_config(collector::resolve_config_path(path));
    return {};
}

int cmd_run(const std::optional<std::string>& config_path) {
    const auto cfg = collector::load_config(collector::resolve_config_path(config_path));
    const auto signals = block_termination();
    fs::create_directories(cfg.storage_dir);

    collector::Collector c(cfg);
    collector::ApiServer api(c, cfg.api.bind, cfg.api.port);
    api.start();
    std::cerr << "collector listening on " << cfg.api.bind << ":" << api.port() << "\n";

    wait_for_termination(signals);
    if (auto id = c.session_id(); id && c.state() == collector::Lifecycle::running) {
        const auto summary = c.stop_session(*id);
        std::cerr << "stopped session " << *id << " (" << summary.rows << " rows)\n";
    }
    api.stop();
    return 0;
}

int cmd_replay(const std::string& logs, const std::string& out, const std::optional<std::string>& config_path) {
    const auto cfg = config_or_default(config_path);
    auto grid = cfg.grid;
    cfg.fusion.apply_windows(grid);
    const auto rows = collector::replay_dir_to_csv(logs, out, grid, cfg.fusion);
    std::cerr << "wrote " << rows << " rows to " << out << "\n";
    return 0;
}

struct SimulateArgs {
    std::string script;
    double speed = 60.0;
    std::string out = "sessions";
    std::optional<std::string> config;
    std::optional<std::string> radar_tcp;
    std::optional<std::string> mqtt;
    std::string session = "sim";
    std::optional<Millis> epoch_ms;
    bool truth = false;
};

void write_truth(const sim::SimOutput& out, const fs::path& path) {
    nlohmann::json ticks = nlohmann::json::array();
    for (const auto& t : out.truth.ticks) {
        nlohmann::json dropout = nlohmann::json::object();
        for (const auto& [src, on] : t.dropout) dropout[std::string(to_string(src))] = on;
        ticks.push_back({{"t_ms", t.t_ms},
                         {"physio_score", t.physio_score},
                         {"ocular_severity", t.ocular_severity},
                         {"distracted", t.distracted},
                         {"motion", t.motion},
                         {"nodding", t.nodding},
                         {"dropout", dropout}});
    }
    std::ofstream f(path);
    f << nlohmann::json{{"ticks", ticks}, {"nod_onsets_ms", out.truth.nod_onsets_ms}}.dump() << '\n';
}

int cmd_simulate(const SimulateArgs& a) {
    auto script = sim::load_script(a.script);

    if (a.radar_tcp || a.mqtt) {
        // Remote mode: act as the devices of a running collector.
        script.start_epoch_ms = a.epoch_ms ? *a.epoch_ms : transport::SystemClock{}.now_ms();
        validate_session_id(a.session);
        const auto out = sim::generate(script, a.session);

        std::unique_ptr<transport::TcpSink> radar;
        std::unique_ptr<mqtt::Client> bus;
        sim::ServeTargets targets;
        targets.session_id = a.session;
        if (a.radar_tcp) {
            radar = std::make_unique<transport::TcpSink>(transport::parse_endpoint(*a.radar_tcp));
            targets.radar = radar.get();
        }
        targets.send_radar = radar != nullptr;
        if (a.mqtt) {
            bus = std::make_unique<mqtt::Client>(transport::parse_mqtt_url(*a.mqtt), mqtt::ClientOptions{"cabin-sim"});
            targets.bus = bus.get();
        }
        targets.send_wearable = targets.send_camera = bus != nullptr;
        const auto stats = sim::serve(out, targets, a.speed);
        std::cout << nlohmann::json{{"radar_frames", stats.radar_frames},
                                    {"wearable_records", stats.wearable_records},
                                    {"camera_records", stats.camera_records}}
                         .dump()
                  << '\n';
        return 0;
    }

    auto cfg = config_or_default(a.config);
    cfg.storage_dir = a.out;
    const auto run = collector::run_local(script, cfg, a.speed);
    if (a.truth) write_truth(run.generated, fs::path(a.out) / (run.session_id + ".truth.json"));
    std::cout << collector::summary_to_json(run.summary).dump(2) << '\n';
    return 0;
}

int cmd_dump(const std::string& store_dir, std::optional<std::string> session, const std::string& out) {
    persist::JsonLinesStore store(store_dir);
    if (!session) {
        const auto all = store.sessions();
        if (all.empty()) throw NotFoundError("no sessions in '" + store_dir + "'");
        session = all.back();
    }
    fs::create_directories(out);
    std::map<Source, std::ofstream> files;
    std::map<Source, std::size_t> counts;
    for (const auto& r : store.all(*session)) {
        if (r.source == Source::fused || r.source == Source::annotation) continue;
        auto it = files.find(r.source);
        if (it == files.end()) {
            it = files.emplace(r.source, std::ofstream(fs::path(out) / (std::string(to_string(r.source)) + ".jsonl")))
                     .first;
        }
        it->second << encode_record(r) << '\n';
        ++counts[r.source];
    }
    for (const auto& [src, n] : counts) std::cerr << to_string(src) << ": " << n << " records\n";
    return 0;
}

int cmd_broker(const std::string& listen) {
    const auto signals = block_termination();
    mqtt::Broker broker(transport::parse_endpoint(listen));
    std::cerr << "broker listening on port " << broker.port() << "\n";
    wait_for_termination(signals);
    broker.stop();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"In-cabin driver monitoring collector"};
    app.require_subcommand(1);

    std::optional<std::string> config;

    auto* run = app.add_subcommand("run", "Serve the control API and ingest live sources");
    run->add_option("--config", config, "Collector config (JSON); CABIN_CONFIG overrides");

    std::string logs, out_csv;
    auto* replay = app.add_subcommand("replay", "Rebuild the fused CSV from per-source logs");
    replay->add_option("--logs", logs, "Directory of *.jsonl record logs")->required();
    replay->add_option("--out", out_csv, "Output CSV")->required();
    replay->add_option("--config", config, "Grid and fusion settings");

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Generate a scenario and feed it to a collector");
    simulate->add_option("--script", sa.script, "Scenario script (JSON)")->required();
    simulate->add_option("--speed", sa.speed, "Time scale; 0 sends as fast as possible")->capture_default_str();
    simulate->add_option("--out", sa.out, "Session directory for a local run")->capture_default_str();
    simulate->add_option("--config", sa.config, "Grid and fusion settings for a local run");
    simulate->add_option("--radar-tcp", sa.radar_tcp, "Send radar bytes to a collector at host:port");
    simulate->add_option("--mqtt", sa.mqtt, "Publish wearable and camera records to this broker");
    simulate->add_option("--session", sa.session, "Session id stamped on remote records")->capture_default_str();
    simulate->add_option("--epoch-ms", sa.epoch_ms, "Scenario start in wall ms (remote mode; default now)");
    simulate->add_flag("--truth", sa.truth, "Also write the ground truth next to the session files");

    std::string store_dir = "sessions", dump_out;
    std::optional<std::string> session;
    auto* dump = app.add_subcommand("dump", "Split a stored session into per-source record logs");
    dump->add_option("--store", store_dir, "Store directory")->capture_default_str();
    dump->add_option("--session", session, "Session id (default: latest)");
    dump->add_option("--out", dump_out, "Output directory")->required();

    std::string listen = "127.0.0.1:1883";
    auto* broker = app.add_subcommand("broker", "Run a minimal local MQTT broker");
    broker->add_option("--listen", listen, "host:port")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config);
        if (*replay) return cmd_replay(logs, out_csv, config);
        if (*simulate) return cmd_simulate(sa);
        if (*dump) return cmd_dump(store_dir, session, dump_out);
        if (*broker) return cmd_broker(listen);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
