#pragma once

#include <cstdint>

namespace telesim {

/// Simulated clock in integer milliseconds. All channel latencies live on this clock.
using SimTime = std::int64_t;

inline constexpr double to_seconds(SimTime t) { return static_cast<double>(t) / 1000.0; }

/// Start of tick `k` of a periodic schedule running at `rate_hz` on the ms clock.
inline constexpr SimTime periodic_tick_time(std::int64_t k, int rate_hz) {
    return (k * 1000) / rate_hz;
}

/// True when `t` is the start of some tick of a `rate_hz` schedule.
inline constexpr bool is_periodic_tick(SimTime t, int rate_hz) {
    // tick k starts at floor(1000k/r); t is a start iff ceil(t r / 1000) maps back to t.
    const std::int64_t k = (t * rate_hz + 999) / 1000;
    return periodic_tick_time(k, rate_hz) == t;
}

} // namespace telesim
