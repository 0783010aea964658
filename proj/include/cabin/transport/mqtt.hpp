#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cabin/transport/bus.hpp"
#include "cabin/transport/socket.hpp"

// Minimal MQTT 3.1.1: CONNECT, PUBLISH (QoS 0/1), SUBSCRIBE, PING and
// DISCONNECT. Enough to speak to a standard broker and to host a small one
// for hermetic tests.
namespace cabin::mqtt {

enum class PacketType : std::uint8_t {
    connect = 1,
    connack = 2,
    publish = 3,
    puback = 4,
    subscribe = 8,
    suback = 9,
    unsubscribe = 10,
    unsuback = 11,
    pingreq = 12,
    pingresp = 13,
    disconnect = 14,
};

struct Packet {
    PacketType type = PacketType::pingreq;
    std::uint8_t flags = 0;
    std::vector<std::uint8_t> body;
};

struct Connect {
    std::string client_id;
    std::uint16_t keepalive_s = 30;
    bool clean_session = true;
};

struct Publish {
    std::string topic;
    std::string payload;
    std::uint8_t qos = 0;
    bool retain = false;
    bool dup = false;
    std::uint16_t packet_id = 0;
};

struct Subscribe {
    std::uint16_t packet_id = 0;
    std::vector<std::pair<std::string, std::uint8_t>> filters;
};

std::vector<std::uint8_t> encode(const Connect& c);
std::vector<std::uint8_t> encode(const Publish& p);
std::vector<std::uint8_t> encode(const Subscribe& s);
std::vector<std::uint8_t> encode_connack(std::uint8_t return_code, bool session_present = false);
std::vector<std::uint8_t> encode_puback(std::uint16_t packet_id);
std::vector<std::uint8_t> encode_suback(std::uint16_t packet_id, std::span<const std::uint8_t> granted);
std::vector<std::uint8_t> encode_simple(PacketType type); // PINGREQ, PINGRESP, DISCONNECT

// Decoders throw ParseError on malformed bodies.
Connect decode_connect(const Packet& p);
Publish decode_publish(const Packet& p);
Subscribe decode_subscribe(const Packet& p);
std::uint16_t decode_packet_id(const Packet& p);
std::uint8_t decode_connack_code(const Packet& p);

/// Incremental framer. Throws ParseError on a malformed remaining-length.
class PacketReader {
public:
    std::vector<Packet> feed(std::span<const std::uint8_t> bytes);

private:
    std::vector<std::uint8_t> buf_;
};

struct ClientOptions {
    std::string client_id = "cabin";
    std::uint16_t keepalive_s = 30;
    int connect_timeout_ms = 3000;
};

/// Blocking-connect MQTT client. Handlers run on the client's reader thread.
class Client final : public transport::MessageBus {
public:
    /// Throws TransportError when the broker is unreachable or refuses.
    Client(const transport::Endpoint& broker, ClientOptions options = {});
    ~Client() override;

    /// QoS 1 publish; does not wait for PUBACK.
    void publish(const std::string& topic, const std::string& payload) override;
    /// Waits for SUBACK so later publishes from other clients are delivered.
    std::uint64_t subscribe(const std::string& filter, transport::MessageHandler handler) override;
    void unsubscribe(std::uint64_t token) override;

    bool connected() const noexcept { return connected_; }
    std::uint64_t acked() const noexcept { return acked_; }

private:
    void reader();
    void send(const std::vector<std::uint8_t>& bytes);
    std::uint16_t next_id();

    struct Sub {
        std::string filter;
        std::shared_ptr<transport::MessageHandler> handler;
    };

    transport::Fd fd_;
    ClientOptions options_;
    std::mutex send_mutex_;
    std::mutex state_mutex_;
    std::condition_variable cv_;
    std::map<std::uint64_t, Sub> subs_;
    std::map<std::uint16_t, bool> pending_subacks_;
    std::uint64_t next_token_ = 1;
    std::uint16_t next_packet_id_ = 1;
    std::atomic<bool> connected_{false};
    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> acked_{0};
    std::thread reader_;
    std::thread pinger_;
};

/// Small in-memory broker: fan-out by filter, QoS 0/1, no retained messages
/// or persistent sessions.
class Broker {
public:
    explicit Broker(transport::Endpoint bind);
    ~Broker();
    std::uint16_t port() const noexcept { return port_; }
    void stop();
    std::uint64_t routed() const noexcept { return routed_; }

private:
    struct Conn;
    void accept_loop();
    void serve(std::shared_ptr<Conn> c);
    void route(const Publish& p);

    transport::Fd listener_;
    std::uint16_t port_ = 0;
    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> routed_{0};
    std::mutex mutex_;
    std::vector<std::shared_ptr<Conn>> conns_;
    std::vector<std::thread> threads_;
    std::thread acceptor_;
};

} // namespace cabin::mqtt
