#include "cabin/transport/mqtt.hpp"

#include <algorithm>
#include <array>
#include <chrono>

#include "cabin/core/errors.hpp"

namespace cabin::mqtt {

namespace {

using Bytes = std::vector<std::uint8_t>;

void put_u16(Bytes& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_str(Bytes& b, const std::string& s) {
    if (s.size() > 0xFFFF) throw ValidationError("MQTT string longer than 65535 bytes");
    put_u16(b, static_cast<std::uint16_t>(s.size()));
    b.insert(b.end(), s.begin(), s.end());
}

Bytes frame(PacketType type, std::uint8_t flags, const Bytes& body) {
    Bytes out;
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint8_t>(type) << 4) | (flags & 0x0F)));
    std::size_t len = body.size();
    if (len > 268'435'455) throw ValidationError("MQTT packet too large");
    do {
        std::uint8_t digit = len % 128;
        len /= 128;
        if (len > 0) digit |= 0x80;
        out.push_back(digit);
    } while (len > 0);
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

struct Cursor {
    const Bytes& b;
    std::size_t pos = 0;

    std::uint8_t u8() {
        if (pos >= b.size()) throw ParseError("MQTT packet truncated");
        return b[pos++];
    }
    std::uint16_t u16() {
        const std::uint16_t hi = u8();
        return static_cast<std::uint16_t>((hi << 8) | u8());
    }
    std::string str() {
        const auto n = u16();
        if (pos + n > b.size()) throw ParseError("MQTT string truncated");
        std::string s(b.begin() + static_cast<std::ptrdiff_t>(pos), b.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return s;
    }
    std::string rest() {
        std::string s(b.begin() + static_cast<std::ptrdiff_t>(pos), b.end());
        pos = b.size();
        return s;
    }
    bool done() const { return pos >= b.size(); }
};

} // namespace

Bytes encode(const Connect& c) {
    Bytes body;
    put_str(body, "MQTT");
    body.push_back(4); // protocol level 3.1.1
    body.push_back(c.clean_session ? 0x02 : 0x00);
    put_u16(body, c.keepalive_s);
    put_str(body, c.client_id);
    return frame(PacketType::connect, 0, body);
}

Bytes encode(const Publish& p) {
    if (p.qos > 1) throw ValidationError("QoS 2 is not supported");
    Bytes body;
    put_str(body, p.topic);
    if (p.qos > 0) put_u16(body, p.packet_id);
    body.insert(body.end(), p.payload.begin(), p.payload.end());
    const std::uint8_t flags =
        static_cast<std::uint8_t>((p.dup ? 0x08 : 0) | (p.qos << 1) | (p.retain ? 0x01 : 0));
    return frame(PacketType::publish, flags, body);
}

Bytes encode(const Subscribe& s) {
    Bytes body;
    put_u16(body, s.packet_id);
    for (const auto& [filter, qos] : s.filters) {
        put_str(body, filter);
        body.push_back(qos);
    }
    return frame(PacketType::subscribe, 0x02, body);
}

Bytes encode_connack(std::uint8_t return_code, bool session_present) {
    return frame(PacketType::connack, 0, Bytes{static_cast<std::uint8_t>(session_present ? 1 : 0), return_code});
}

Bytes encode_puback(std::uint16_t packet_id) {
    Bytes body;
    put_u16(body, packet_id);
    return frame(PacketType::puback, 0, body);
}

Bytes encode_suback(std::uint16_t packet_id, std::span<const std::uint8_t> granted) {
    Bytes body;
    put_u16(body, packet_id);
    body.insert(body.end(), granted.begin(), granted.end());
    return frame(PacketType::suback, 0, body);
}

Bytes encode_simple(PacketType type) { return frame(type, 0, {}); }

Connect decode_connect(const Packet& p) {
    Cursor c{p.body};
    if (c.str() != "MQTT") throw ParseError("unsupported MQTT protocol name");
    if (c.u8() != 4) throw ParseError("unsupported MQTT protocol level");
    const auto flags = c.u8();
    Connect out;
    out.clean_session = (flags & 0x02) != 0;
    out.keepalive_s = c.u16();
    out.client_id = c.str();
    return out;
}

Publish decode_publish(const Packet& p) {
    Cursor c{p.body};
    Publish out;
    out.dup = (p.flags & 0x08) != 0;
    out.qos = static_cast<std::uint8_t>((p.flags >> 1) & 0x03);
    out.retain = (p.flags & 0x01) != 0;
    if (out.qos > 1) throw ParseError("QoS 2 is not supported");
    out.topic = c.str();
    if (out.qos > 0) out.packet_id = c.u16();
    out.payload = c.rest();
    return out;
}

Subscribe decode_subscribe(const Packet& p) {
    Cursor c{p.body};
    Subscribe out;
    out.packet_id = c.u16();
    while (!c.done()) {
        auto filter = c.str();
        const auto qos = c.u8();
        out.filters.emplace_back(std::move(filter), qos);
    }
    if (out.filters.empty()) throw ParseError("SUBSCRIBE without filters");
    return out;
}

std::uint16_t decode_packet_id(const Packet& p) {
    Cursor c{p.body};
    return c.u16();
}

std::uint8_t decode_connack_code(const Packet& p) {
    Cursor c{p.body};
    c.u8();
    return c.u8();
}

std::vector<Packet> PacketReader::feed(std::span<const std::uint8_t> bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    std::vector<Packet> out;
    std::size_t pos = 0;
    for (;;) {
        if (buf_.size() - pos < 2) break;
        std::size_t len = 0;
        std::size_t mult = 1;
        std::size_t i = pos + 1;
        bool complete = false;
        for (int k = 0; k < 4; ++k, ++i) {
            if (i >= buf_.size()) break;
            len += (buf_[i] & 0x7F) * mult;
            mult *= 128;
            if ((buf_[i] & 0x80) == 0) {
                complete = true;
                ++i;
                break;
            }
            if (k == 3) throw ParseError("MQTT remaining length exceeds 4 bytes");
        }
        if (!complete || buf_.size() - i < len) break;
        Packet p;
        p.type = static_cast<PacketType>(buf_[pos] >> 4);
        p.flags = buf_[pos] & 0x0F;
        p.body.assign(buf_.begin() + static_cast<std::ptrdiff_t>(i),
                      buf_.begin() + static_cast<std::ptrdiff_t>(i + len));
        out.push_back(std::move(p));
        pos = i + len;
    }
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos));
    return out;
}

// ---- client ----

Client::Client(const transport::Endpoint& broker, ClientOptions options)
    : fd_(transport::tcp_connect(broker)), options_(std::move(options)) {
    send(encode(Connect{options_.client_id, options_.keepalive_s, true}));

    PacketReader pr;
    std::array<std::uint8_t, 256> buf{};
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(options_.connect_timeout_ms);
    while (!connected_) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline -
                                                                                std::chrono::steady_clock::now());
        if (left.count() <= 0) throw TransportError("MQTT broker did not answer CONNECT");
        const long n = transport::recv_some(fd_, buf, static_cast<int>(left.count()));
        if (n < 0) throw TransportError("MQTT broker closed the connection during CONNECT");
        for (const auto& p : pr.feed(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)))) {
            if (p.type != PacketType::connack) throw TransportError("MQTT broker sent an unexpected packet");
            if (const auto rc = decode_connack_code(p); rc != 0) {
                throw TransportError("MQTT broker refused the connection (code " + std::to_string(rc) + ")");
            }
            connected_ = true;
        }
    }
    reader_ = std::thread([this] { reader(); });
    if (options_.keepalive_s > 0) {
        pinger_ = std::thread([this] {
            const auto period = std::chrono::milliseconds(options_.keepalive_s * 500);
            auto next = std::chrono::steady_clock::now() + period;
            while (!stop_) {
                std::this_thread::sleep_for(std::chrono::milliseconds(50));
                if (std::chrono::steady_clock::now() < next) continue;
                next += period;
                try {
                    send(encode_simple(PacketType::pingreq));
                } catch (const Error&) {
                    return;
                }
            }
        });
    }
}

Client::~Client() {
    stop_ = true;
    try {
        if (connected_) send(encode_simple(PacketType::disconnect));
    } catch (const Error&) {
    }
    fd_.shutdown();
    if (reader_.joinable()) reader_.join();
    if (pinger_.joinable()) pinger_.join();
}

void Client::send(const std::vector<std::uint8_t>& bytes) {
    std::lock_guard lock(send_mutex_);
    transport::send_all(fd_, bytes);
}

std::uint16_t Client::next_id() {
    std::lock_guard lock(state_mutex_);
    if (next_packet_id_ == 0) next_packet_id_ = 1;
    return next_packet_id_++;
}

void Client::publish(const std::string& topic, const std::string& payload) {
    if (!connected_) throw TransportError("MQTT client is disconnected");
    send(encode(Publish{topic, payload, 1, false, false, next_id()}));
}

std::uint64_t Client::subscribe(const std::string& filter, transport::MessageHandler handler) {
    if (!connected_) throw TransportError("MQTT client is disconnected");
    const auto id = next_id();
    std::uint64_t token = 0;
    {
        std::lock_guard lock(state_mutex_);
        token = next_token_++;
        subs_[token] = Sub{filter, std::make_shared<transport::MessageHandler>(std::move(handler))};
        pending_subacks_[id] = false;
    }
    send(encode(Subscribe{id, {{filter, 1}}}));
    std::unique_lock lock(state_mutex_);
    const bool ok = cv_.wait_for(lock, std::chrono::milliseconds(options_.connect_timeout_ms),
                                 [&] { return pending_subacks_[id] || !connected_; });
    pending_subacks_.erase(id);
    if (!ok || !connected_) throw TransportError("MQTT broker did not acknowledge SUBSCRIBE to '" + filter + "'");
    return token;
}

void Client::unsubscribe(std::uint64_t token) {
    // Local only: the broker keeps routing but nothing is dispatched.
    std::lock_guard lock(state_mutex_);
    subs_.erase(token);
}

void Client::reader() {
    PacketReader pr;
    std::array<std::uint8_t, 8192> buf{};
    while (!stop_) {
        const long n = transport::recv_some(fd_, buf, 100);
        if (n < 0) break;
        if (n == 0) continue;
        std::vector<Packet> packets;
        try {
            packets = pr.feed(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
        } catch (const ParseError&) {
            break;
        }
        for (const auto& p : packets) {
            switch (p.type) {
            case PacketType::publish: {
                Publish msg;
                try {
                    msg = decode_publish(p);
                } catch (const ParseError&) {
                    continue;
                }
                if (msg.qos == 1) {
                    try {
                        send(encode_puback(msg.packet_id));
                    } catch (const Error&) {
                    }
                }
                std::vector<std::shared_ptr<transport::MessageHandler>> targets;
                {
                    std::lock_guard lock(state_mutex_);
                    for (const auto& [tok, s] : subs_) {
                        if (transport::topic_matches(s.filter, msg.topic)) targets.push_back(s.handler);
                    }
                }
                for (const auto& h : targets) {
                    try {
                        (*h)(msg.topic, msg.payload);
                    } catch (...) {
                        // A failing handler must not kill the connection.
                    }
                }
                break;
            }
            case PacketType::suback: {
                std::lock_guard lock(state_mutex_);
                pending_subacks_[decode_packet_id(p)] = true;
                cv_.notify_all();
                break;
            }
            case PacketType::puback:
                ++acked_;
                break;
            default:
                break;
            }
        }
    }
    connected_ = false;
    std::lock_guard lock(state_mutex_);
    cv_.notify_all();
}

// ---- broker ----

struct Broker::Conn {
    transport::Fd fd;
    std::mutex send_mutex;
    std::vector<std::pair<std::string, std::uint8_t>> filters;
    std::uint16_t next_id = 1;
    bool alive = true;

    void send(const Bytes& b) {
        std::lock_guard lock(send_mutex);
        transport::send_all(fd, b);
    }
};

Broker::Broker(transport::Endpoint bind) {
    listener_ = transport::tcp_listen(bind, &port_);
    acceptor_ = std::thread([this] { accept_loop(); });
}

Broker::~Broker() { stop(); }

void Broker::stop() {
    if (stop_.exchange(true)) return;
    if (acceptor_.joinable()) acceptor_.join();
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(mutex_);
        for (auto& c : conns_) c->fd.shutdown();
        threads.swap(threads_);
    }
    for (auto& t : threads) t.join();
}

void Broker::accept_loop() {
    while (!stop_) {
        auto fd = transport::tcp_accept(listener_, 100);
        if (!fd.valid()) continue;
        auto conn = std::make_shared<Conn>();
        conn->fd = std::move(fd);
        std::lock_guard lock(mutex_);
        conns_.push_back(conn);
        threads_.emplace_back([this, conn] { serve(conn); });
    }
}

void Broker::route(const Publish& p) {
    std::vector<std::pair<std::shared_ptr<Conn>, std::uint8_t>> targets;
    {
        std::lock_guard lock(mutex_);
        for (const auto& c : conns_) {
            if (!c->alive) continue;
            std::optional<std::uint8_t> granted;
            for (const auto& [filter, qos] : c->filters) {
                if (transport::topic_matches(filter, p.topic)) granted = std::max(granted.value_or(0), qos);
            }
            if (granted) targets.emplace_back(c, std::min(*granted, p.qos));
        }
    }
    for (auto& [c, qos] : targets) {
        Publish out{p.topic, p.payload, qos, false, false, 0};
        if (qos > 0) {
            std::lock_guard lock(mutex_);
            if (c->next_id == 0) c->next_id = 1;
            out.packet_id = c->next_id++;
        }
        try {
            c->send(encode(out));
        } catch (const Error&) {
            c->fd.shutdown();
        }
    }
    ++routed_;
}

void Broker::serve(std::shared_ptr<Conn> c) {
    PacketReader pr;
    std::array<std::uint8_t, 8192> buf{};
    bool connected = false;
    try {
        while (!stop_) {
            const long n = transport::recv_some(c->fd, buf, 100);
            if (n < 0) break;
            if (n == 0) continue;
            bool done = false;
            for (const auto& p : pr.feed(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)))) {
                if (!connected && p.type != PacketType::connect) {
                    done = true;
                    break;
                }
                switch (p.type) {
                case PacketType::connect:
                    decode_connect(p);
                    connected = true;
                    c->send(encode_connack(0));
                    break;
                case PacketType::publish: {
                    const auto msg = decode_publish(p);
                    if (msg.qos == 1) c->send(encode_puback(msg.packet_id));
                    route(msg);
                    break;
                }
                case PacketType::subscribe: {
                    const auto sub = decode_subscribe(p);
                    std::vector<std::uint8_t> granted;
                    {
                        std::lock_guard lock(mutex_);
                        for (const auto& [filter, qos] : sub.filters) {
                            const auto g = std::min<std::uint8_t>(qos, 1);
                            c->filters.emplace_back(filter, g);
                            granted.push_back(g);
                        }
                    }
                    c->send(encode_suback(sub.packet_id, granted));
                    break;
                }
                case PacketType::pingreq:
                    c->send(encode_simple(PacketType::pingresp));
                    break;
                case PacketType::disconnect:
                    done = true;
                    break;
                default:
                    break;
                }
                if (done) break;
            }
            if (done) break;
        }
    } catch (const Error&) {
        // Malformed input or a dead peer ends this connection only.
    }
    std::lock_guard lock(mutex_);
    c->alive = false;
    c->fd.shutdown();
    std::erase(conns_, c);
}

} // namespace cabin::mqtt
