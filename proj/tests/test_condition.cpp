#include "telesim/condition.hpp"
#include "telesim/errors.hpp"

#include <doctest.h>

using namespace telesim;

TEST_CASE("control has no delay on any channel") {
    const ConditionSpec c = make_condition(ConditionKind::control, 0);
    CHECK(c.visual_delay == 0);
    CHECK(c.haptic_delay == 0);
    CHECK(c.delay(Channel::command) == 0);
    CHECK(c.visuomotor_gap() == 0);
    CHECK(c.label() == "control-0");
    CHECK_THROWS_AS(make_condition(ConditionKind::control, 250), ConfigError);
}

TEST_CASE("anchoring keeps haptics local and immediate") {
    for (SimTime v : kDelayLevels) {
        const ConditionSpec c = make_condition(ConditionKind::anchoring, v);
        CHECK(c.visual_delay == v);
        CHECK(c.haptic_delay == 0);
        CHECK(c.haptic_source == HapticSource::local_simulation);
        CHECK(c.visuomotor_gap() == v);
    }
}

TEST_CASE("synchronous delays both channels equally") {
    for (SimTime v : kDelayLevels) {
        const ConditionSpec c = make_condition(ConditionKind::synchronous, v);
        CHECK(c.visual_delay == v);
        CHECK(c.haptic_delay == v);
        CHECK(c.haptic_source == HapticSource::remote_sensor);
        CHECK(c.visuomotor_gap() == 0);
    }
}

TEST_CASE("asynchronous uses a fixed 250 ms haptic delay below the visual one") {
    for (SimTime v : {500, 750, 1000}) {
        const ConditionSpec c = make_condition(ConditionKind::asynchronous, v);
        CHECK(c.visual_delay == v);
        CHECK(c.haptic_delay == 250);
        CHECK(c.haptic_delay < c.visual_delay);
        CHECK(c.visuomotor_gap() == v - 250);
    }
    CHECK_THROWS_AS(make_condition(ConditionKind::asynchronous, 250), ConfigError);
}

TEST_CASE("delays outside the experimental levels are rejected") {
    for (ConditionKind k : {ConditionKind::anchoring, ConditionKind::synchronous, ConditionKind::asynchronous}) {
        CHECK_THROWS_AS(make_condition(k, 0), ConfigError);
        CHECK_THROWS_AS(make_condition(k, 300), ConfigError);
        CHECK_THROWS_AS(make_condition(k, -500), ConfigError);
        CHECK_THROWS_AS(make_condition(k, 2000), ConfigError);
    }
    CHECK_THROWS_AS(make_condition(ConditionKind::anchoring, 500, -1), ConfigError);
}

TEST_CASE("onset delay rides on the command channel") {
    const ConditionSpec c = make_condition(ConditionKind::anchoring, 750, 120);
    CHECK(c.delay(Channel::command) == 120);
    CHECK(c.delay(Channel::visual) == 750);
    CHECK(c.delay(Channel::haptic) == 0);
}

TEST_CASE("names round-trip") {
    for (ConditionKind k : kAllConditions) CHECK(condition_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(condition_kind_from_string("delayed"), ConfigError);
    CHECK(display_name(ConditionKind::asynchronous) == "Asynchronous");
}
