#include "cabin/transport/socket.hpp"

#include <cerrno>
#include <charconv>
#include <cstring>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "cabin/core/errors.hpp"

namespace cabin::transport {

void Fd::reset(int fd) noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
}

void Fd::shutdown() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Endpoint parse_endpoint(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
        throw ConfigError("endpoint '" + std::string(text) + "' must be host:port");
    }
    Endpoint ep;
    ep.host = std::string(text.substr(0, colon));
    const auto port_text = text.substr(colon + 1);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || value > 65535) {
        throw ConfigError("endpoint '" + std::string(text) + "' has a bad port");
    }
    ep.port = static_cast<std::uint16_t>(value);
    return ep;
}

Endpoint parse_mqtt_url(std::string_view url) {
    for (std::string_view scheme : {"mqtt://", "tcp://"}) {
        if (url.substr(0, scheme.size()) == scheme) {
            url.remove_prefix(scheme.size());
            break;
        }
    }
    if (auto slash = url.find('/'); slash != std::string_view::npos) url = url.substr(0, slash);
    if (url.find(':') == std::string_view::npos) {
        if (url.empty()) throw ConfigError("MQTT URL has no host");
        return Endpoint{std::string(url), 1883};
    }
    return parse_endpoint(url);
}

namespace {

addrinfo* resolve(const Endpoint& ep, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const auto port = std::to_string(ep.port);
    const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0) throw TransportError("cannot resolve '" + ep.host + "': " + ::gai_strerror(rc));
    return res;
}

std::string describe(const Endpoint& ep) { return ep.host + ":" + std::to_string(ep.port); }

} // namespace

Fd tcp_connect(const Endpoint& ep) {
    addrinfo* res = resolve(ep, false);
    std::string last_error = "no address";
    for (auto* ai = res; ai; ai = ai->ai_next) {
        Fd fd(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (!fd.valid()) continue;
        if (::connect(fd.get(), ai->ai_addr, ai->ai_addrlen) == 0) {
            int one = 1;
            ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            ::freeaddrinfo(res);
            return fd;
        }
        last_error = std::strerror(errno);
    }
    ::freeaddrinfo(res);
    throw TransportError("cannot connect to " + describe(ep) + ": " + last_error);
}

Fd tcp_listen(const Endpoint& ep, std::uint16_t* bound_port) {
    addrinfo* res = resolve(ep, true);
    std::string last_error = "no address";
    for (auto* ai = res; ai; ai = ai->ai_next) {
        Fd fd(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (!fd.valid()) continue;
        int one = 1;
        ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd.get(), ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd.get(), 16) == 0) {
            ::freeaddrinfo(res);
            if (bound_port) {
                sockaddr_in addr{};
                socklen_t len = sizeof addr;
                ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len);
                *bound_port = ntohs(addr.sin_port);
            }
            return fd;
        }
        last_error = std::strerror(errno);
    }
    ::freeaddrinfo(res);
    throw TransportError("cannot listen on " + describe(ep) + ": " + last_error);
}

Fd tcp_accept(const Fd& listener, int timeout_ms) {
    pollfd p{listener.get(), POLLIN, 0};
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc <= 0) return Fd{};
    if (p.revents & (POLLERR | POLLNVAL)) throw TransportError("listener failed");
    Fd fd(::accept4(listener.get(), nullptr, nullptr, SOCK_CLOEXEC));
    if (fd.valid()) {
        int one = 1;
        ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    return fd;
}

void send_all(const Fd& fd, std::span<const std::uint8_t> bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(fd.get(), bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("send failed: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
}

long recv_some(const Fd& fd, std::span<std::uint8_t> buf, int timeout_ms) {
    pollfd p{fd.get(), POLLIN, 0};
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc == 0) return 0;
    if (rc < 0) return errno == EINTR ? 0 : -1;
    const ssize_t n = ::read(fd.get(), buf.data(), buf.size());
    if (n < 0 && (errno == EINTR || errno == EAGAIN)) return 0;
    if (n <= 0) return -1;
    return static_cast<long>(n);
}

} // namespace cabin::transport
