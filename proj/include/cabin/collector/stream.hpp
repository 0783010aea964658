#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace cabin::collector {

struct StreamEvent {
    std::string type; // "status", "row", "annotation"
    std::string data; // JSON text

    bool operator==(const StreamEvent&) const = default;
};

/// Server-sent events framing ("event: ...\ndata: ...\n\n").
std::string to_sse(const StreamEvent& e);

/// One consumer's bounded queue.
class StreamSubscription {
public:
    explicit StreamSubscription(std::size_t limit) : limit_(limit) {}

    /// Waits up to timeout; nullopt on timeout or once closed and drained.
    std::optional<StreamEvent> next(std::chrono::milliseconds timeout);
    bool closed() const;
    /// True when the hub dropped this consumer for falling behind.
    bool overflowed() const;
    void close();

private:
    friend class StreamHub;
    /// False when the queue is full; the subscription is then closed.
    bool push(const StreamEvent& e);

    std::size_t limit_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<StreamEvent> queue_;
    bool closed_ = false;
    bool overflowed_ = false;
};

/// Fans events out to every subscriber without ever blocking the publisher.
class StreamHub {
public:
    explicit StreamHub(std::size_t queue_limit = 1024) : limit_(queue_limit) {}

    std::shared_ptr<StreamSubscription> subscribe(const StreamEvent& initial);
    void publish(const StreamEvent& e);
    std::size_t subscribers() const;
    void close_all();

private:
    std::size_t limit_;
    mutable std::mutex mutex_;
    std::vector<std::shared_ptr<StreamSubscription>> subs_;
};

} // namespace cabin::collector
