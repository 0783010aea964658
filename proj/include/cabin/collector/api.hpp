#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "cabin/collector/service.hpp"

namespace cabin::collector {

/// HTTP+JSON control surface over a Collector.
///
///   POST /session/start            {"subject_pseudo_id"?, "devices"?} -> {"session_id"}
///   POST /session/{id}/annotate    {"kind", "value", "ts"?}           -> {"ok": true}
///   POST /session/{id}/stop                                           -> summary
///   GET  /status                                                      -> status document
///   GET  /stream                                                      -> text/event-stream
///
/// Errors come back as {"error": kind, "message": text} with 400/404/409/500.
class ApiServer {
public:
    ApiServer(Collector& collector, std::string bind, std::uint16_t port);
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Throws TransportError when the address is taken.
    void start();
    void stop();
    std::uint16_t port() const noexcept;

    /// Serves on the calling thread until stop().
    void run();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace cabin::collector
