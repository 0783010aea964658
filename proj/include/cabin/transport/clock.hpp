#pragma once

#include <atomic>
#include <chrono>
#include <memory>

#include "cabin/core/model.hpp"

namespace cabin::transport {

/// Wall clock in epoch milliseconds, injectable so simulated sessions can
/// run faster than real time.
class Clock {
public:
    virtual ~Clock() = default;
    virtual Millis now_ms() const = 0;
    /// True when time only moves because someone sets it.
    virtual bool manual() const { return false; }
};

class SystemClock final : public Clock {
public:
    Millis now_ms() const override;
};

/// Starts at epoch_ms and runs speed times faster than the steady clock.
class ScaledClock final : public Clock {
public:
    ScaledClock(Millis epoch_ms, double speed);
    Millis now_ms() const override;

private:
    Millis epoch_ms_;
    double speed_;
    std::chrono::steady_clock::time_point origin_;
};

/// Set explicitly, typically by a simulator's scheduler.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Millis start_ms = 0) : now_(start_ms) {}
    Millis now_ms() const override { return now_.load(std::memory_order_acquire); }
    bool manual() const override { return true; }
    void set(Millis t) { now_.store(t, std::memory_order_release); }
    void advance(Millis dt) { now_.fetch_add(dt, std::memory_order_acq_rel); }

private:
    std::atomic<Millis> now_;
};

} // namespace cabin::transport
