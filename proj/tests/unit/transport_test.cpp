#include <gtest/gtest.h>

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "cabin/core/errors.hpp"
#include "cabin/transport/bus.hpp"
#include "cabin/transport/bytes.hpp"
#include "cabin/transport/clock.hpp"
#include "cabin/transport/mqtt.hpp"
#include "cabin/transport/socket.hpp"

using namespace cabin;
using namespace cabin::transport;
using namespace std::chrono_literals;

namespace {

template <class Pred>
bool wait_until(Pred pred, std::chrono::milliseconds limit = 3000ms) {
    const auto deadline = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(5ms);
    }
    return pred();
}

std::vector<std::uint8_t> bytes(std::initializer_list<int> v) {
    std::vector<std::uint8_t> out;
    for (int b : v) out.push_back(static_cast<std::uint8_t>(b));
    return out;
}

} // namespace

TEST(Topics, FilterMatching) {
    EXPECT_TRUE(topic_matches("cabin/s1/radar/data", "cabin/s1/radar/data"));
    EXPECT_TRUE(topic_matches("cabin/+/radar/data", "cabin/s1/radar/data"));
    EXPECT_FALSE(topic_matches("cabin/+/radar/data", "cabin/s1/camera/data"));
    EXPECT_FALSE(topic_matches("cabin/+", "cabin/s1/radar"));
    EXPECT_TRUE(topic_matches("cabin/#", "cabin/s1/radar/data"));
    EXPECT_TRUE(topic_matches("cabin/#", "cabin"));
    EXPECT_TRUE(topic_matches("#", "a/b"));
    EXPECT_FALSE(topic_matches("cabin/s1", "cabin/s1/radar"));
    EXPECT_TRUE(topic_matches("+/+", "a/"));
}

TEST(InProcessBus, FanOutAndUnsubscribe) {
    InProcessBus bus;
    std::vector<std::string> a, b;
    const auto ta = bus.subscribe("x/+", [&](const std::string& t, const std::string& p) { a.push_back(t + "=" + p); });
    bus.subscribe("x/#", [&](const std::string&, const std::string& p) { b.push_back(p); });
    EXPECT_TRUE(bus.has_route("x/1"));
    EXPECT_FALSE(bus.has_route("y/1"));
    bus.publish("x/1", "one");
    bus.publish("y/1", "lost");
    bus.unsubscribe(ta);
    bus.publish("x/2", "two");
    EXPECT_EQ(a, (std::vector<std::string>{"x/1=one"}));
    EXPECT_EQ(b, (std::vector<std::string>{"one", "two"}));
    EXPECT_EQ(bus.published(), 3u);
}

TEST(InProcessBus, HandlersMayPublish) {
    InProcessBus bus;
    int echoed = 0;
    bus.subscribe("ping", [&](const std::string&, const std::string&) { bus.publish("pong", "x"); });
    bus.subscribe("pong", [&](const std::string&, const std::string&) { ++echoed; });
    bus.publish("ping", "x");
    EXPECT_EQ(echoed, 1);
}

TEST(InProcessPipe, DeliversSynchronously) {
    InProcessPipe pipe;
    const auto data = bytes({1, 2, 3});
    EXPECT_THROW(pipe.write(data), TransportError);
    std::vector<std::uint8_t> got;
    pipe.start([&](std::span<const std::uint8_t> b) { got.insert(got.end(), b.begin(), b.end()); });
    EXPECT_TRUE(pipe.connected());
    pipe.write(data);
    EXPECT_EQ(got, data);
    pipe.stop();
    EXPECT_FALSE(pipe.connected());
}

TEST(Endpoints, Parsing) {
    const auto e = parse_endpoint("10.0.0.2:7000");
    EXPECT_EQ(e.host, "10.0.0.2");
    EXPECT_EQ(e.port, 7000);
    EXPECT_THROW(parse_endpoint("nohost"), ConfigError);
    EXPECT_THROW(parse_endpoint("h:99999"), ConfigError);
    EXPECT_THROW(parse_endpoint("h:abc"), ConfigError);
    EXPECT_EQ(parse_mqtt_url("mqtt://broker").port, 1883);
    EXPECT_EQ(parse_mqtt_url("tcp://b:1884").port, 1884);
    EXPECT_EQ(parse_mqtt_url("mqtt://b:1884").host, "b");
    EXPECT_THROW(parse_mqtt_url("http://b:80"), ConfigError);
}

TEST(Clocks, ScaledAndManual) {
    ScaledClock c(1'000'000, 100.0);
    const auto t0 = c.now_ms();
    EXPECT_GE(t0, 1'000'000);
    std::this_thread::sleep_for(50ms);
    const auto dt = c.now_ms() - t0;
    EXPECT_GE(dt, 4500);
    EXPECT_LT(dt, 60000);
    EXPECT_FALSE(c.manual());

    ManualClock m(5);
    m.advance(10);
    EXPECT_EQ(m.now_ms(), 15);
    m.set(3);
    EXPECT_EQ(m.now_ms(), 3);
    EXPECT_TRUE(m.manual());
}

TEST(Tcp, ListenSourceReceivesSinkBytes) {
    TcpListenSource src(Endpoint{"127.0.0.1", 0});
    std::mutex mu;
    std::vector<std::uint8_t> got;
    src.start([&](std::span<const std::uint8_t> b) {
        std::lock_guard lock(mu);
        got.insert(got.end(), b.begin(), b.end());
    });
    ASSERT_NE(src.port(), 0);
    std::vector<std::uint8_t> sent(5000);
    for (std::size_t i = 0; i < sent.size(); ++i) sent[i] = static_cast<std::uint8_t>(i * 7);
    {
        TcpSink sink(Endpoint{"127.0.0.1", src.port()});
        sink.write(std::span(sent).first(1000));
        sink.write(std::span(sent).subspan(1000));
    }
    EXPECT_TRUE(wait_until([&] {
        std::lock_guard lock(mu);
        return got.size() == sent.size();
    }));
    src.stop();
    EXPECT_EQ(got, sent);
}

TEST(Tcp, ConnectRefused) {
    std::uint16_t port = 0;
    { auto l = tcp_listen(Endpoint{"127.0.0.1", 0}, &port); }
    EXPECT_THROW(TcpSink(Endpoint{"127.0.0.1", port}), TransportError);
}

TEST(MqttWire, KnownEncodings) {
    EXPECT_EQ(mqtt::encode_simple(mqtt::PacketType::pingreq), bytes({0xC0, 0x00}));
    EXPECT_EQ(mqtt::encode_simple(mqtt::PacketType::disconnect), bytes({0xE0, 0x00}));
    mqtt::Publish p{"a/b", "hi", 0, false, false, 0};
    EXPECT_EQ(mqtt::encode(p), bytes({0x30, 7, 0, 3, 'a', '/', 'b', 'h', 'i'}));
    p.qos = 1;
    p.packet_id = 0x0102;
    EXPECT_EQ(mqtt::encode(p), bytes({0x32, 9, 0, 3, 'a', '/', 'b', 1, 2, 'h', 'i'}));
    EXPECT_EQ(mqtt::encode_puback(0x0A0B), bytes({0x40, 2, 0x0A, 0x0B}));
    EXPECT_EQ(mqtt::encode_connack(0), bytes({0x20, 2, 0, 0}));
}

TEST(MqttWire, RoundTripsThroughReader) {
    mqtt::Publish p{"cabin/s/camera/data", std::string(300, 'x'), 1, false, false, 77};
    mqtt::Connect c{"dev-1", 45, true};
    mqtt::Subscribe s{9, {{"cabin/+/radar/data", 1}, {"cabin/#", 0}}};
    std::vector<std::uint8_t> stream;
    for (const auto& part : {mqtt::encode(c), mqtt::encode(p), mqtt::encode(s)}) {
        stream.insert(stream.end(), part.begin(), part.end());
    }
    mqtt::PacketReader reader;
    std::vector<mqtt::Packet> packets;
    for (std::uint8_t b : stream) {
        for (auto& pk : reader.feed(std::span(&b, 1))) packets.push_back(std::move(pk));
    }
    ASSERT_EQ(packets.size(), 3u);
    const auto c2 = mqtt::decode_connect(packets[0]);
    EXPECT_EQ(c2.client_id, "dev-1");
    EXPECT_EQ(c2.keepalive_s, 45);
    const auto p2 = mqtt::decode_publish(packets[1]);
    EXPECT_EQ(p2.topic, p.topic);
    EXPECT_EQ(p2.payload, p.payload);
    EXPECT_EQ(p2.packet_id, 77);
    EXPECT_EQ(p2.qos, 1);
    const auto s2 = mqtt::decode_subscribe(packets[2]);
    EXPECT_EQ(s2.packet_id, 9);
    EXPECT_EQ(s2.filters, s.filters);
}

TEST(MqttWire, MalformedLength) {
    mqtt::PacketReader reader;
    const auto bad = bytes({0x30, 0xFF, 0xFF, 0xFF, 0xFF, 0x01});
    EXPECT_THROW(reader.feed(bad), ParseError);
    mqtt::Packet pk{mqtt::PacketType::publish, 0, bytes({0, 9, 'a'})};
    EXPECT_THROW(mqtt::decode_publish(pk), ParseError);
}

TEST(Mqtt, BrokerRoutesBetweenClients) {
    mqtt::Broker broker(Endpoint{"127.0.0.1", 0});
    const Endpoint ep{"127.0.0.1", broker.port()};
    mqtt::Client sub(ep, {"sub"});
    mqtt::Client pub(ep, {"pub"});
    std::mutex mu;
    std::vector<std::string> got;
    sub.subscribe("cabin/+/wearable/data", [&](const std::string& t, const std::string& p) {
        std::lock_guard lock(mu);
        got.push_back(t + " " + p);
    });
    for (int i = 0; i < 50; ++i) pub.publish("cabin/s1/wearable/data", std::to_string(i));
    pub.publish("cabin/s1/camera/data", "other");
    ASSERT_TRUE(wait_until([&] {
        std::lock_guard lock(mu);
        return got.size() == 50;
    }));
    for (int i = 0; i < 50; ++i) EXPECT_EQ(got[i], "cabin/s1/wearable/data " + std::to_string(i));
    EXPECT_TRUE(wait_until([&] { return pub.acked() == 51; }));
    std::this_thread::sleep_for(50ms);
    EXPECT_EQ(got.size(), 50u);
}

TEST(Mqtt, UnreachableBroker) {
    std::uint16_t port = 0;
    { auto l = tcp_listen(Endpoint{"127.0.0.1", 0}, &port); }
    mqtt::ClientOptions o;
    o.connect_timeout_ms = 500;
    EXPECT_THROW(mqtt::Client(Endpoint{"127.0.0.1", port}, o), TransportError);
}
