#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace cabin::transport {

/// MQTT-style filter match: '+' matches one level, a trailing '#' matches the
/// remaining levels (including none).
bool topic_matches(std::string_view filter, std::string_view topic);

using MessageHandler = std::function<void(const std::string& topic, const std::string& payload)>;

/// Publish/subscribe contract shared by the MQTT client and the in-process bus.
class MessageBus {
public:
    virtual ~MessageBus() = default;

    /// Throws TransportError when the message cannot be handed to the broker.
    virtual void publish(const std::string& topic, const std::string& payload) = 0;

    /// Returns a token for unsubscribe.
    virtual std::uint64_t subscribe(const std::string& filter, MessageHandler handler) = 0;
    virtual void unsubscribe(std::uint64_t token) = 0;

    /// Whether anyone is known to listen on topic. Brokers cannot tell, so the
    /// default is optimistic.
    virtual bool has_route(const std::string& topic) const {
        (void)topic;
        return true;
    }
};

/// Synchronous bus: publish runs matching handlers on the caller's thread in
/// subscription order. Handlers run without the bus lock held and may publish.
class InProcessBus final : public MessageBus {
public:
    void publish(const std::string& topic, const std::string& payload) override;
    std::uint64_t subscribe(const std::string& filter, MessageHandler handler) override;
    void unsubscribe(std::uint64_t token) override;
    bool has_route(const std::string& topic) const override;

    std::uint64_t published() const;

private:
    struct Subscription {
        std::uint64_t token;
        std::string filter;
        std::shared_ptr<MessageHandler> handler;
    };

    mutable std::mutex mutex_;
    std::vector<Subscription> subs_;
    std::uint64_t next_token_ = 1;
    std::uint64_t published_ = 0;
};

} // namespace cabin::transport
