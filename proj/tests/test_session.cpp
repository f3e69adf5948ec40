#include "telesim/errors.hpp"
#include "telesim/metrics.hpp"
#include "telesim/session.hpp"

#include <doctest.h>

#include <map>

using namespace telesim;

namespace {

TrialConfig config(ConditionKind kind, SimTime v, SimTime onset = 0) {
    TrialConfig c;
    c.condition = make_condition(kind, v, onset);
    c.seed = 5;
    return c;
}

struct Delivered {
    std::vector<SimTime> visual, haptic; // delivered - emitted
};

Delivered run_with_hooks(const TrialConfig& c, TrialLog* out = nullptr) {
    Delivered d;
    Session s(c, std::make_unique<ScriptedInput>(c, Pose{}), {false});
    SessionHooks h;
    h.on_visual = [&](const VisualFrame& f, SimTime at) { d.visual.push_back(at - f.emitted); };
    h.on_haptic = [&](const HapticFrame& f, SimTime at) { d.haptic.push_back(at - f.emitted); };
    s.set_hooks(std::move(h));
    while (s.step()) {
    }
    if (out) *out = s.finish();
    return d;
}

bool all_equal(const std::vector<SimTime>& v, SimTime x) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [x](SimTime e) { return e == x; });
}

} // namespace

TEST_CASE("synchronous-1000 delivers every frame exactly one second late") {
    TrialLog log;
    const Delivered d = run_with_hooks(config(ConditionKind::synchronous, 1000), &log);
    CHECK(all_equal(d.visual, 1000));
    CHECK(all_equal(d.haptic, 1000));
    std::size_t delivered = 0;
    for (const FrameRow& f : log.frames) {
        if (f.delivered) {
            CHECK(*f.delivered - f.emitted == 1000);
            ++delivered;
        }
    }
    CHECK(delivered == d.visual.size());
    CHECK(log.frames.size() - delivered <= 90);
}

TEST_CASE("every cell delivers each channel at its own delay") {
    for (ConditionKind kind : {ConditionKind::synchronous, ConditionKind::asynchronous, ConditionKind::anchoring}) {
        for (SimTime v : kDelayLevels) {
            if (kind == ConditionKind::asynchronous && v == 250) continue;
            const ConditionSpec cond = make_condition(kind, v);
            CAPTURE(cond.label());
            TrialConfig c = config(kind, v);
            c.duration_cap_s = 4.0;
            const Delivered d = run_with_hooks(c);
            CHECK(all_equal(d.visual, cond.visual_delay));
            CHECK(all_equal(d.haptic, cond.haptic_delay));
        }
    }
}

TEST_CASE("control grasps follow the command within one operator tick") {
    const TrialLog log = run_trial(config(ConditionKind::control, 0));
    const Performance p = performance_from_events(log.events, 4);
    REQUIRE(p.complete);
    std::size_t checked = 0;
    for (const EventRow& g : log.events) {
        if (g.kind != "grasp") continue;
        // the most recent grasp command before the grasp
        SimTime command = -1;
        for (const EventRow& e : log.events) {
            if (e.kind == "grasp_command" && e.t <= g.t) command = std::max(command, e.t);
        }
        REQUIRE(command >= 0);
        CHECK(g.t - command <= 12);
        ++checked;
    }
    CHECK(checked >= 4);
}

TEST_CASE("commands wait out the onset delay under anchoring") {
    TrialConfig c = config(ConditionKind::anchoring, 500, 120);
    c.duration_cap_s = 5.0;
    const TrialLog log = run_trial(c);
    std::map<std::uint64_t, SimTime> delivered;
    for (const TickRow& t : log.ticks) {
        for (std::uint64_t id : t.delivered) delivered[id] = t.t;
    }
    std::size_t n = 0;
    for (const InputRow& r : log.inputs) {
        const auto it = delivered.find(r.command_id);
        if (it == delivered.end()) continue;
        CHECK(it->second - r.t == 120);
        ++n;
    }
    CHECK(n > 400);
}

TEST_CASE("the operator rate is floor(1000 k / 90)") {
    TrialConfig c = config(ConditionKind::control, 0);
    c.duration_cap_s = 2.0;
    c.stop_on_completion = false;
    const TrialLog log = run_trial(c);
    REQUIRE(log.inputs.size() == 180);
    for (std::size_t k = 0; k < log.inputs.size(); ++k) CHECK(log.inputs[k].t == static_cast<SimTime>(k * 1000 / 90));
}

TEST_CASE("an aborted session keeps the partial log") {
    TrialConfig c = config(ConditionKind::synchronous, 750);
    Session s(c, std::make_unique<ScriptedInput>(c, Pose{}));
    for (int i = 0; i < 2500; ++i) s.step();
    s.abort("operator left");
    CHECK(s.done());
    CHECK_FALSE(s.step());
    const TrialLog log = s.finish();
    CHECK(log.aborted);
    CHECK(log.abort_reason == "operator left");
    CHECK(log.duration == 2500);
    CHECK(log.ticks.size() == 2500);
    CHECK(log.events.back().kind == "aborted");
}

TEST_CASE("the duration cap ends an unfinished trial") {
    TrialConfig c = config(ConditionKind::synchronous, 1000);
    c.duration_cap_s = 3.0;
    const TrialLog log = run_trial(c);
    CHECK(log.duration == 3000);
    CHECK_FALSE(log.aborted);
    CHECK_FALSE(performance_from_events(log.events, 4).complete);
}

TEST_CASE("seeded trials are deterministic and seeds matter") {
    const TrialConfig c = config(ConditionKind::asynchronous, 500);
    const TrialLog a = run_trial(c), b = run_trial(c);
    CHECK(diff_logs(a, b).empty());
    TrialConfig other = c;
    other.seed = 6;
    CHECK_FALSE(diff_logs(run_trial(other), a).empty());
}

TEST_CASE("render_frame tracks the scene") {
    const RgbFrame blank = render_frame(nullptr, 0);
    CHECK(blank.pixels() == 64 * 48);
    TrialConfig c = config(ConditionKind::control, 0);
    Session s(c, std::make_unique<ScriptedInput>(c, Pose{}));
    s.step();
    const RgbFrame f = render_frame(&s.world(), 0);
    CHECK(f.pixels() == blank.pixels());
    CHECK(f.rgb != blank.rgb);
    CHECK(render_frame(&s.world(), 0).rgb == f.rgb);
}

TEST_CASE("config_of recovers the trial config") {
    TrialConfig c = config(ConditionKind::anchoring, 1000, 40);
    c.onset_cue = CueStyle::vibration;
    c.duration_cap_s = 1.0;
    const TrialLog log = run_trial(c);
    CHECK(config_to_json(config_of(log)) == config_to_json(c));
}
