#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace cabin::transport {

/// Owning file descriptor.
class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    ~Fd() { reset(); }
    Fd(Fd&& o) noexcept : fd_(o.release()) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) reset(o.release());
        return *this;
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;

    int get() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    int release() noexcept {
        int f = fd_;
        fd_ = -1;
        return f;
    }
    void reset(int fd = -1) noexcept;
    /// shutdown(2) both directions, waking blocked readers.
    void shutdown() noexcept;

private:
    int fd_ = -1;
};

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

/// "host:port". Throws ConfigError.
Endpoint parse_endpoint(std::string_view text);

/// "mqtt://host:port" or "tcp://host:port"; the port defaults to 1883.
Endpoint parse_mqtt_url(std::string_view url);

/// Throws TransportError.
Fd tcp_connect(const Endpoint& ep);
Fd tcp_listen(const Endpoint& ep, std::uint16_t* bound_port = nullptr);

/// Waits up to timeout_ms for a connection; returns an invalid Fd on timeout.
Fd tcp_accept(const Fd& listener, int timeout_ms);

/// Throws TransportError on a closed or failed socket.
void send_all(const Fd& fd, std::span<const std::uint8_t> bytes);

/// Waits up to timeout_ms for input. Returns bytes read, 0 on timeout, and -1
/// on orderly close or error.
long recv_some(const Fd& fd, std::span<std::uint8_t> buf, int timeout_ms);

} // namespace cabin::transport
