#include "telesim/delay_pipeline.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <thread>

using namespace telesim;

namespace {

std::vector<ConditionSpec> all_cells() {
    std::vector<ConditionSpec> out{make_condition(ConditionKind::control, 0)};
    for (SimTime v : kDelayLevels) {
        out.push_back(make_condition(ConditionKind::anchoring, v, v % 500 == 0 ? 40 : 0));
        out.push_back(make_condition(ConditionKind::synchronous, v));
        if (v > 250) out.push_back(make_condition(ConditionKind::asynchronous, v));
    }
    return out;
}

} // namespace

TEST_CASE("fuzzed events arrive exactly one channel delay after emission, in oracle order") {
    std::mt19937_64 rng(99);
    const auto cells = all_cells();
    std::size_t total = 0;
    for (const ConditionSpec& cond : cells) {
        DelayPipeline<int> pipe(cond);
        std::vector<oracle::Stamped> sent;
        std::vector<oracle::Stamped> got;
        const SimTime horizon = 3000;
        for (SimTime t = 0; t <= horizon + 1000; ++t) {
            if (t <= horizon) {
                const int n = static_cast<int>(rng() % 3);
                for (int k = 0; k < n; ++k) {
                    const auto ch = static_cast<Channel>(rng() % 3);
                    const std::uint64_t seq = pipe.enqueue(static_cast<int>(sent.size()), ch, t);
                    sent.push_back({static_cast<int>(ch), t, t + cond.delay(ch), seq});
                }
            }
            for (auto& ev : pipe.drain_due(t)) {
                CHECK(t - ev.emit_time == cond.delay(ev.channel));
                got.push_back({static_cast<int>(ev.channel), ev.emit_time, t, ev.sequence});
            }
        }
        const auto expected = oracle::sorted_delivery(sent);
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].seq == expected[i].seq);
            CHECK(got[i].due == expected[i].due);
        }
        total += got.size();
    }
    CHECK(total >= 10000);
}

TEST_CASE("each channel is FIFO") {
    DelayPipeline<int> pipe(make_condition(ConditionKind::asynchronous, 500));
    for (SimTime t = 0; t < 100; ++t) {
        pipe.enqueue(static_cast<int>(t), Channel::visual, t);
        pipe.enqueue(static_cast<int>(t), Channel::haptic, t);
    }
    int last_visual = -1, last_haptic = -1;
    for (SimTime t = 0; t < 700; ++t) {
        for (auto& ev : pipe.drain_due(t)) {
            int& last = ev.channel == Channel::visual ? last_visual : last_haptic;
            CHECK(ev.payload > last);
            last = ev.payload;
        }
    }
    CHECK(last_visual == 99);
    CHECK(last_haptic == 99);
}

TEST_CASE("drain time may not run backwards") {
    DelayPipeline<int> pipe(make_condition(ConditionKind::control, 0));
    pipe.drain_due(10);
    CHECK_NOTHROW(pipe.drain_due(10));
    CHECK_THROWS_AS(pipe.drain_due(9), MonotonicityError);
}

TEST_CASE("high water mark tracks the deepest queue") {
    DelayPipeline<int> pipe(make_condition(ConditionKind::synchronous, 250));
    for (SimTime t = 0; t < 1000; ++t) {
        pipe.enqueue(0, Channel::haptic, t);
        pipe.drain_due(t);
    }
    CHECK(pipe.high_water_mark(Channel::haptic) == 251);
    CHECK(pipe.pending(Channel::haptic) == 250);
    CHECK(pipe.high_water_mark(Channel::command) == 0);
}

TEST_CASE("one producer per channel on separate threads") {
    const ConditionSpec cond = make_condition(ConditionKind::asynchronous, 1000);
    DelayPipeline<int> pipe(cond);
    auto produce = [&](Channel ch) {
        for (SimTime t = 0; t < 5000; ++t) pipe.enqueue(static_cast<int>(t), ch, t);
    };
    std::thread a(produce, Channel::visual), b(produce, Channel::haptic), c(produce, Channel::command);
    a.join();
    b.join();
    c.join();
    std::size_t n = 0;
    std::uint64_t prev_due = 0;
    for (auto& ev : pipe.drain_due(7000)) {
        CHECK(ev.due_time - ev.emit_time == cond.delay(ev.channel));
        CHECK(static_cast<std::uint64_t>(ev.due_time) >= prev_due);
        prev_due = static_cast<std::uint64_t>(ev.due_time);
        ++n;
    }
    CHECK(n == 15000);
}

TEST_CASE("sync buffer aligns haptic samples to the target delay") {
    std::vector<TimedSample<double>> stream;
    std::mt19937_64 rng(3);
    for (SimTime t = 0; t < 500; t += 10) {
        const SimTime intrinsic = static_cast<SimTime>(rng() % 80);
        stream.push_back({t, t + intrinsic, static_cast<double>(t)});
    }
    const auto out = synchronize_buffer<double>(stream, 100);
    REQUIRE(out.size() == stream.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].arrival_time - out[i].emit_time == 100);
        if (i > 0) CHECK(out[i].arrival_time >= out[i - 1].arrival_time);
    }
    stream.push_back({600, 750, 0.0});
    CHECK_THROWS_AS(synchronize_buffer<double>(stream, 100), InfeasibleBufferError);
}

TEST_CASE("sync buffer releases nothing early") {
    SyncBuffer<int> buf(250);
    buf.push({0, 30, 1});
    buf.push({10, 20, 2});
    CHECK(buf.pop_due(249).empty());
    auto first = buf.pop_due(250);
    REQUIRE(first.size() == 1);
    CHECK(first[0].value == 1);
    CHECK(buf.pop_due(260).size() == 1);
    CHECK(buf.size() == 0);
}
