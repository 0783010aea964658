#include "cabin/collector/stream.hpp"

#include <algorithm>

namespace cabin::collector {

std::string to_sse(const StreamEvent& e) {
    std::string out = "event: " + e.type + "\n";
    std::size_t pos = 0;
    for (;;) {
        const auto nl = e.data.find('\n', pos);
        out += "data: " + e.data.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos) + "\n";
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    out += "\n";
    return out;
}

std::optional<StreamEvent> StreamSubscription::next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    auto e = std::move(queue_.front());
    queue_.pop_front();
    return e;
}

bool StreamSubscription::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

bool StreamSubscription::overflowed() const {
    std::lock_guard lock(mutex_);
    return overflowed_;
}

void StreamSubscription::close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    cv_.notify_all();
}

bool StreamSubscription::push(const StreamEvent& e) {
    std::lock_guard lock(mutex_);
    if (closed_) return false;
    if (queue_.size() >= limit_) {
        // Drop the consumer instead of stalling the pipeline; what it already
        // received stays a gap-free prefix.
        overflowed_ = true;
        closed_ = true;
        queue_.clear();
        cv_.notify_all();
        return false;
    }
    queue_.push_back(e);
    cv_.notify_all();
    return true;
}

std::shared_ptr<StreamSubscription> StreamHub::subscribe(const StreamEvent& initial) {
    auto sub = std::make_shared<StreamSubscription>(limit_);
    sub->push(initial);
    std::lock_guard lock(mutex_);
    subs_.push_back(sub);
    return sub;
}

void StreamHub::publish(const StreamEvent& e) {
    std::lock_guard lock(mutex_);
    std::erase_if(subs_, [&](const std::shared_ptr<StreamSubscription>& s) { return !s->push(e); });
}

std::size_t StreamHub::subscribers() const {
    std::lock_guard lock(mutex_);
    return subs_.size();
}

void StreamHub::close_all() {
    std::lock_guard lock(mutex_);
    for (auto& s : subs_) s->close();
    subs_.clear();
}

} // namespace cabin::collector
