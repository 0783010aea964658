#include "cabin/transport/clock.hpp"

#include <cmath>

#include "cabin/core/errors.hpp"

namespace cabin::transport {

Millis SystemClock::now_ms() const {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

ScaledClock::ScaledClock(Millis epoch_ms, double speed)
    : epoch_ms_(epoch_ms), speed_(speed), origin_(std::chrono::steady_clock::now()) {
    if (!(speed > 0.0) || !std::isfinite(speed)) throw ConfigError("clock speed must be positive");
}

Millis ScaledClock::now_ms() const {
    const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - origin_).count();
    return epoch_ms_ + static_cast<Millis>(std::floor(elapsed * speed_));
}

} // namespace cabin::transport
