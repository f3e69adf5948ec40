#pragma once

#include "telesim/condition.hpp"
#include "telesim/errors.hpp"
#include "telesim/sim_time.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <deque>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace telesim {

template <class Payload>
struct ChannelEvent {
    Channel channel = Channel::command;
    SimTime emit_time = 0;
    SimTime due_time = 0;
    std::uint64_t sequence = 0;
    Payload payload{};
};

/// Per-channel delay buffers on the integer-ms clock. Each channel is a FIFO
/// indexed by due time; drain_due merges the channels in (due_time, sequence)
/// order. Safe for one producer and one consumer per channel.
template <class Payload>
class DelayPipeline {
  public:
    using Event = ChannelEvent<Payload>;

    explicit DelayPipeline(const ConditionSpec& condition) : condition_(condition) {}

    const ConditionSpec& condition() const { return condition_; }

    std::uint64_t enqueue(Payload payload, Channel channel, SimTime now) {
        Event ev;
        ev.channel = channel;
        ev.emit_time = now;
        ev.due_time = now + condition_.delay(channel);
        ev.sequence = next_sequence_.fetch_add(1, std::memory_order_relaxed);
        ev.payload = std::move(payload);
        const std::uint64_t seq = ev.sequence;

        Lane& lane = lane_for(channel);
        std::lock_guard lock(lane.mutex);
        // Producers on the ms clock append; an out-of-order `now` is placed by due time.
        auto pos = lane.events.end();
        while (pos != lane.events.begin() && later(*std::prev(pos), ev)) --pos;
        lane.events.insert(pos, std::move(ev));
        lane.high_water = std::max(lane.high_water, lane.events.size());
        return seq;
    }

    /// Removes and returns every event with due_time <= now, ordered by
    /// (due_time, sequence). Throws MonotonicityError if `now` regresses.
    std::vector<Event> drain_due(SimTime now) {
        {
            std::lock_guard lock(clock_mutex_);
            if (drained_once_ && now < last_drain_) {
                throw MonotonicityError("drain_due time regressed from " + std::to_string(last_drain_) +
                                        " to " + std::to_string(now));
            }
            last_drain_ = now;
            drained_once_ = true;
        }
        std::vector<Event> out;
        for (Lane& lane : lanes_) {
            std::lock_guard lock(lane.mutex);
            while (!lane.events.empty() && lane.events.front().due_time <= now) {
                out.push_back(std::move(lane.events.front()));
                lane.events.pop_front();
            }
        }
        std::sort(out.begin(), out.end(), [](const Event& a, const Event& b) { return later(b, a); });
        return out;
    }

    std::size_t pending(Channel channel) const {
        const Lane& lane = lanes_[index(channel)];
        std::lock_guard lock(lane.mutex);
        return lane.events.size();
    }

    std::size_t high_water_mark(Channel channel) const {
        const Lane& lane = lanes_[index(channel)];
        std::lock_guard lock(lane.mutex);
        return lane.high_water;
    }

  private:
    struct Lane {
        mutable std::mutex mutex;
        std::deque<Event> events;
        std::size_t high_water = 0;
    };

    static bool later(const Event& a, const Event& b) {
        return a.due_time != b.due_time ? a.due_time > b.due_time : a.sequence > b.sequence;
    }
    static std::size_t index(Channel c) { return static_cast<std::size_t>(c); }
    Lane& lane_for(Channel c) { return lanes_[index(c)]; }

    ConditionSpec condition_;
    std::array<Lane, 3> lanes_;
    std::atomic<std::uint64_t> next_sequence_{0};
    std::mutex clock_mutex_;
    SimTime last_drain_ = 0;
    bool drained_once_ = false;
};

/// A sample with its emission time and the time it reached the buffer.
template <class T>
struct TimedSample {
    SimTime emit_time = 0;
    SimTime arrival_time = 0;
    T value{};
};

/// Holds haptic samples back so total latency equals `target_delay`,
/// aligning the haptic stream with a delayed visual stream.
template <class T>
class SyncBuffer {
  public:
    explicit SyncBuffer(SimTime target_delay) : target_delay_(target_delay) {}

    SimTime target_delay() const { return target_delay_; }

    void push(const TimedSample<T>& sample) {
        const SimTime intrinsic = sample.arrival_time - sample.emit_time;
        if (intrinsic > target_delay_) {
            throw InfeasibleBufferError("intrinsic haptic delay " + std::to_string(intrinsic) +
                                        " ms exceeds target " + std::to_string(target_delay_) + " ms");
        }
        TimedSample<T> held = sample;
        held.arrival_time = sample.emit_time + target_delay_;
        auto pos = held_.end();
        while (pos != held_.begin() && std::prev(pos)->arrival_time > held.arrival_time) --pos;
        held_.insert(pos, std::move(held));
    }

    /// Samples whose release time has come; arrival_time is the release time.
    std::vector<TimedSample<T>> pop_due(SimTime now) {
        std::vector<TimedSample<T>> out;
        while (!held_.empty() && held_.front().arrival_time <= now) {
            out.push_back(std::move(held_.front()));
            held_.pop_front();
        }
        return out;
    }

    std::size_t size() const { return held_.size(); }

  private:
    SimTime target_delay_;
    std::deque<TimedSample<T>> held_;
};

/// Batch form of SyncBuffer: returns the stream with arrival_time rewritten to
/// the release time emit_time + target_delay. Throws InfeasibleBufferError if
/// any sample already arrived later than that.
template <class T>
std::vector<TimedSample<T>> synchronize_buffer(std::span<const TimedSample<T>> stream, SimTime target_delay) {
    SyncBuffer<T> buffer(target_delay);
    SimTime last = 0;
    for (const auto& s : stream) {
        buffer.push(s);
        last = std::max(last, s.emit_time + target_delay);
    }
    return buffer.pop_due(last);
}

} // namespace telesim
