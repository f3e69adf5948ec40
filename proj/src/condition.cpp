#include "telesim/condition.hpp"

#include "telesim/errors.hpp"

#include <algorithm>

namespace telesim {

std::string_view to_string(ConditionKind k) {
    switch (k) {
    case ConditionKind::control: return "control";
    case ConditionKind::anchoring: return "anchoring";
    case ConditionKind::synchronous: return "synchronous";
    case ConditionKind::asynchronous: return "asynchronous";
    }
    return "control";
}

std::string_view display_name(ConditionKind k) {
    switch (k) {
    case ConditionKind::control: return "Control";
    case ConditionKind::anchoring: return "Anchoring";
    case ConditionKind::synchronous: return "Synchronous";
    case ConditionKind::asynchronous: return "Asynchronous";
    }
    return "Control";
}

std::string_view to_string(HapticSource s) {
    return s == HapticSource::local_simulation ? "local_simulation" : "remote_sensor";
}

std::string_view to_string(Channel c) {
    switch (c) {
    case Channel::command: return "command";
    case Channel::visual: return "visual";
    case Channel::haptic: return "haptic";
    }
    return "command";
}

ConditionKind condition_kind_from_string(std::string_view s) {
    for (ConditionKind k : kAllConditions) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("unknown condition '" + std::string(s) + "'");
}

SimTime ConditionSpec::delay(Channel c) const {
    switch (c) {
    case Channel::command: return onset_delay;
    case Channel::visual: return visual_delay;
    case Channel::haptic: return haptic_delay;
    }
    return 0;
}

SimTime ConditionSpec::visuomotor_gap() const {
    return visual_delay > haptic_delay ? visual_delay - haptic_delay : haptic_delay - visual_delay;
}

std::string ConditionSpec::label() const {
    return std::string(to_string(kind)) + "-" + std::to_string(visual_delay);
}

ConditionSpec make_condition(ConditionKind kind, SimTime visual_delay, SimTime onset_delay) {
    if (onset_delay < 0) {
        throw ConfigError("onset delay must be non-negative");
    }
    const bool level = std::find(kDelayLevels.begin(), kDelayLevels.end(), visual_delay) != kDelayLevels.end();
    ConditionSpec spec;
    spec.kind = kind;
    spec.visual_delay = visual_delay;
    spec.onset_delay = onset_delay;
    switch (kind) {
    case ConditionKind::control:
        if (visual_delay != 0) {
            throw ConfigError("control condition requires zero visual delay");
        }
        spec.haptic_delay = 0;
        spec.haptic_source = HapticSource::remote_sensor;
        break;
    case ConditionKind::anchoring:
        if (!level) {
            throw ConfigError("anchoring visual delay must be one of 250/500/750/1000 ms");
        }
        spec.haptic_delay = 0;
        spec.haptic_source = HapticSource::local_simulation;
        break;
    case ConditionKind::synchronous:
        if (!level) {
            throw ConfigError("synchronous visual delay must be one of 250/500/750/1000 ms");
        }
        spec.haptic_delay = visual_delay;
        spec.haptic_source = HapticSource::remote_sensor;
        break;
    case ConditionKind::asynchronous:
        if (!level) {
            throw ConfigError("asynchronous visual delay must be one of 250/500/750/1000 ms");
        }
        if (visual_delay <= kAsynchronousHapticDelay) {
            throw ConfigError("asynchronous condition needs visual delay > 250 ms haptic delay");
        }
        spec.haptic_delay = kAsynchronousHapticDelay;
        spec.haptic_source = HapticSource::remote_sensor;
        break;
    }
    return spec;
}

} // namespace telesim
