#include "telesim/errors.hpp"
#include "telesim/metrics.hpp"
#include "telesim/operator.hpp"
#include "telesim/session.hpp"

#include <doctest.h>

using namespace telesim;

namespace {

TrialConfig config(ConditionKind kind, SimTime v, PolicyVariant variant,
                   ConfirmationChannel channel = ConfirmationChannel::haptic, std::uint64_t seed = 1) {
    TrialConfig c;
    c.condition = make_condition(kind, v);
    c.policy.variant = variant;
    c.policy.confirmation_channel = channel;
    c.seed = seed;
    c.synthetic_pupil = false;
    return c;
}

Performance perform(const TrialConfig& c, TrialLog* out = nullptr) {
    TrialLog log = run_trial(c, {false});
    Performance p = performance_from_events(log.events, c.scene.script.steps.size());
    if (out) *out = std::move(log);
    return p;
}

std::size_t count(const TrialLog& log, const std::string& kind) {
    return static_cast<std::size_t>(std::count_if(log.events.begin(), log.events.end(),
                                                  [&](const EventRow& e) { return e.kind == kind; }));
}

} // namespace

TEST_CASE("policy validation") {
    OperatorPolicy p;
    CHECK_NOTHROW(p.validate());
    p.speed_limit = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.reaction_time = -1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.aim_noise = -0.1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    for (PolicyVariant v : {PolicyVariant::continuous_pursuit, PolicyVariant::wait_for_confirmation,
                            PolicyVariant::move_and_wait}) {
        CHECK(policy_variant_from_string(to_string(v)) == v);
    }
    for (ConfirmationChannel c : {ConfirmationChannel::visual, ConfirmationChannel::haptic, ConfirmationChannel::either}) {
        CHECK(confirmation_channel_from_string(to_string(c)) == c);
    }
    CHECK_THROWS_AS(policy_variant_from_string("hurry"), ConfigError);
}

TEST_CASE("every policy completes the task in every condition family") {
    for (PolicyVariant v : {PolicyVariant::continuous_pursuit, PolicyVariant::wait_for_confirmation,
                            PolicyVariant::move_and_wait}) {
        for (auto [kind, delay] : {std::pair{ConditionKind::control, SimTime{0}},
                                   std::pair{ConditionKind::anchoring, SimTime{750}},
                                   std::pair{ConditionKind::synchronous, SimTime{500}},
                                   std::pair{ConditionKind::asynchronous, SimTime{1000}}}) {
            CAPTURE(to_string(v));
            CAPTURE(to_string(kind));
            TrialLog log;
            const Performance p = perform(config(kind, delay, v), &log);
            CHECK(p.complete);
            CHECK(p.cubes.size() == 4);
            CHECK(count(log, "ik_failure") == 0);
        }
    }
}

TEST_CASE("visual confirmation waits for the delayed frame") {
    const Performance haptic =
        perform(config(ConditionKind::anchoring, 1000, PolicyVariant::wait_for_confirmation, ConfirmationChannel::haptic));
    const Performance visual =
        perform(config(ConditionKind::anchoring, 1000, PolicyVariant::wait_for_confirmation, ConfirmationChannel::visual));
    REQUIRE(haptic.complete);
    REQUIRE(visual.complete);
    // visual confirmation pays the 1 s visual delay at each grasp instead of the 0 ms haptic one
    CHECK(visual.time_on_task > haptic.time_on_task + 3.5);
}

TEST_CASE("the operator notes each confirmation") {
    TrialConfig c = config(ConditionKind::synchronous, 500, PolicyVariant::wait_for_confirmation);
    c.stop_on_completion = false; // let the operator see the last release too
    c.duration_cap_s = 60.0;
    TrialLog log;
    const Performance p = perform(c, &log);
    REQUIRE(p.complete);
    CHECK(count(log, "grasp_command") >= 4);
    CHECK(count(log, "confirm_grasp") == 4);
    CHECK(count(log, "confirm_release") == 4);
    CHECK(confirmation_points(log.events, p) == 4);
}

TEST_CASE("waiting is reported while the operator holds for feedback") {
    TrialLog log = run_trial(config(ConditionKind::synchronous, 1000, PolicyVariant::wait_for_confirmation));
    std::size_t waiting = 0;
    for (const InputRow& r : log.inputs) waiting += r.waiting;
    CHECK(waiting > 0);
    CHECK(waiting < log.inputs.size());
}

TEST_CASE("seeds change reaction jitter but not the outcome") {
    const Performance a = perform(config(ConditionKind::synchronous, 500, PolicyVariant::wait_for_confirmation,
                                         ConfirmationChannel::haptic, 1));
    const Performance b = perform(config(ConditionKind::synchronous, 500, PolicyVariant::wait_for_confirmation,
                                         ConfirmationChannel::haptic, 2));
    CHECK(a.complete);
    CHECK(b.complete);
    CHECK(a.time_on_task != b.time_on_task);
    CHECK(a.placement_accuracy != b.placement_accuracy);
}

TEST_CASE("delays lengthen the task") {
    const Performance control = perform(config(ConditionKind::control, 0, PolicyVariant::wait_for_confirmation));
    const Performance slow = perform(config(ConditionKind::synchronous, 1000, PolicyVariant::wait_for_confirmation));
    CHECK(slow.time_on_task > control.time_on_task);
}
