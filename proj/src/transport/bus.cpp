#include "cabin/transport/bus.hpp"

#include <algorithm>

namespace cabin::transport {

bool topic_matches(std::string_view filter, std::string_view topic) {
    std::size_t f = 0;
    std::size_t t = 0;
    for (;;) {
        const auto f_end = std::min(filter.find('/', f), filter.size());
        const auto level = filter.substr(f, f_end - f);
        if (level == "#") return f_end == filter.size();
        if (t > topic.size()) return false;
        const auto t_end = std::min(topic.find('/', t), topic.size());
        if (level != "+" && level != topic.substr(t, t_end - t)) return false;

        const bool f_last = f_end == filter.size();
        const bool t_last = t_end == topic.size();
        if (f_last || t_last) {
            if (f_last && t_last) return true;
            // "a/#" also matches "a".
            return t_last && filter.substr(f_end) == "/#";
        }
        f = f_end + 1;
        t = t_end + 1;
    }
}

void InProcessBus::publish(const std::string& topic, const std::string& payload) {
    std::vector<std::shared_ptr<MessageHandler>> targets;
    {
        std::lock_guard lock(mutex_);
        ++published_;
        for (const auto& s : subs_) {
            if (topic_matches(s.filter, topic)) targets.push_back(s.handler);
        }
    }
    for (const auto& h : targets) (*h)(topic, payload);
}

std::uint64_t InProcessBus::subscribe(const std::string& filter, MessageHandler handler) {
    std::lock_guard lock(mutex_);
    const auto token = next_token_++;
    subs_.push_back({token, filter, std::make_shared<MessageHandler>(std::move(handler))});
    return token;
}

void InProcessBus::unsubscribe(std::uint64_t token) {
    std::lock_guard lock(mutex_);
    std::erase_if(subs_, [&](const Subscription& s) { return s.token == token; });
}

bool InProcessBus::has_route(const std::string& topic) const {
    std::lock_guard lock(mutex_);
    return std::any_of(subs_.begin(), subs_.end(), [&](const Subscription& s) { return topic_matches(s.filter, topic); });
}

std::uint64_t InProcessBus::published() const {
    std::lock_guard lock(mutex_);
    return published_;
}

} // namespace cabin::transport
