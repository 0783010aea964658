#include "cabin/collector/api.hpp"

#include <atomic>
#include <thread>

#include <httplib.h>

#include "cabin/core/errors.hpp"
#include "cabin/core/wire.hpp"

namespace cabin::collector {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
    reply(res, status, json{{"error", kind}, {"message", message}});
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
    try {
        body();
    } catch (const StateError& e) {
        reply_error(res, 409, "state", e.what());
    } catch (const NotFoundError& e) {
        reply_error(res, 404, "not_found", e.what());
    } catch (const ValidationError& e) {
        reply_error(res, 400, "validation", e.what());
    } catch (const SchemaError& e) {
        reply_error(res, 400, "schema", e.what());
    } catch (const ParseError& e) {
        reply_error(res, 400, "parse", e.what());
    } catch (const ConfigError& e) {
        reply_error(res, 400, "config", e.what());
    } catch (const std::exception& e) {
        reply_error(res, 500, "internal", e.what());
    }
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("request body: ") + e.what());
    }
}

StartRequest start_request_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("start request must be an object");
    StartRequest r;
    if (auto it = j.find("subject_pseudo_id"); it != j.end()) {
        if (!it->is_string()) throw SchemaError("subject_pseudo_id must be a string");
        r.subject_pseudo_id = it->get<std::string>();
    }
    if (auto it = j.find("devices"); it != j.end()) {
        if (!it->is_array()) throw SchemaError("devices must be an array");
        std::vector<DeviceInfo> devices;
        for (const auto& d : *it) {
            if (!d.is_object() || !d.contains("source") || !d["source"].is_string() || !d.contains("model") ||
                !d["model"].is_string()) {
                throw SchemaError("device needs string source and model");
            }
            devices.push_back({parse_source(d["source"].get<std::string>()), d["model"].get<std::string>()});
        }
        r.devices = std::move(devices);
    }
    return r;
}

} // namespace

struct ApiServer::Impl {
    Collector& collector;
    std::string bind;
    std::uint16_t requested_port;
    std::uint16_t bound_port = 0;
    httplib::Server server;
    std::thread thread;
    std::atomic<bool> stopping{false};

    Impl(Collector& c, std::string b, std::uint16_t p) : collector(c), bind(std::move(b)), requested_port(p) {
        routes();
    }

    void routes() {
        server.Post("/session/start", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto id = collector.start_session(start_request_from_json(parse_body(req)));
                reply(res, 200, json{{"session_id", id}});
            });
        });
        server.Post(R"(/session/([^/]+)/annotate)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                json body = parse_body(req);
                if (body.is_object() && !body.contains("ts")) body["ts"] = 0;
                collector.annotate(req.matches[1].str(), annotation_from_json(body));
                reply(res, 200, json{{"ok", true}});
            });
        });
        server.Post(R"(/session/([^/]+)/stop)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, 200, summary_to_json(collector.stop_session(req.matches[1].str()))); });
        });
        server.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] { reply(res, 200, collector.status()); });
        });
        server.Get("/stream", [this](const httplib::Request&, httplib::Response& res) {
            auto sub = collector.subscribe();
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream",
                [this, sub](std::size_t, httplib::DataSink& sink) {
                    if (stopping) return false;
                    auto ev = sub->next(std::chrono::milliseconds(1000));
                    if (ev) {
                        const auto text = to_sse(*ev);
                        return sink.write(text.data(), text.size());
                    }
                    if (sub->closed()) {
                        sink.done();
                        return true;
                    }
                    static constexpr char kHeartbeat[] = ": keepalive\n\n";
                    return sink.write(kHeartbeat, sizeof(kHeartbeat) - 1);
                },
                [sub](bool) { sub->close(); });
        });
    }

    void bind_socket() {
        if (requested_port == 0) {
            const int p = server.bind_to_any_port(bind);
            if (p <= 0) throw TransportError("cannot bind " + bind);
            bound_port = static_cast<std::uint16_t>(p);
        } else {
            if (!server.bind_to_port(bind, requested_port)) {
                throw TransportError("cannot bind " + bind + ":" + std::to_string(requested_port));
            }
            bound_port = requested_port;
        }
    }
};

ApiServer::ApiServer(Collector& collector, std::string bind, std::uint16_t port)
    : impl_(std::make_unique<Impl>(collector, std::move(bind), port)) {}

ApiServer::~ApiServer() { stop(); }

void ApiServer::start() {
    impl_->bind_socket();
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void ApiServer::run() {
    impl_->bind_socket();
    impl_->server.listen_after_bind();
}

void ApiServer::stop() {
    impl_->stopping = true;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

std::uint16_t ApiServer::port() const noexcept { return impl_->bound_port; }

} // namespace cabin::collector
