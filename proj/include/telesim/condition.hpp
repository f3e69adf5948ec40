#pragma once

#include "telesim/sim_time.hpp"

#include <array>
#include <string>
#include <string_view>

namespace telesim {

enum class ConditionKind { control, anchoring, synchronous, asynchronous };
enum class HapticSource { local_simulation, remote_sensor };
enum class Channel { command, visual, haptic };

inline constexpr std::array<ConditionKind, 4> kAllConditions{
    ConditionKind::control, ConditionKind::anchoring, ConditionKind::asynchronous,
    ConditionKind::synchronous};
inline constexpr std::array<SimTime, 4> kDelayLevels{250, 500, 750, 1000};
inline constexpr SimTime kAsynchronousHapticDelay = 250;

std::string_view to_string(ConditionKind k);
std::string_view to_string(HapticSource s);
std::string_view to_string(Channel c);
ConditionKind condition_kind_from_string(std::string_view s);
/// Capitalized label used in comparison tables ("Anchoring").
std::string_view display_name(ConditionKind k);

/// One sensory-manipulation condition with its resolved channel delays (ms).
struct ConditionSpec {
    ConditionKind kind = ConditionKind::control;
    SimTime visual_delay = 0;
    SimTime haptic_delay = 0;
    SimTime onset_delay = 0;
    HapticSource haptic_source = HapticSource::remote_sensor;

    SimTime delay(Channel c) const;
    /// Actual visuomotor gap |visual - haptic|.
    SimTime visuomotor_gap() const;
    std::string label() const; // e.g. "synchronous-500"

    friend bool operator==(const ConditionSpec&, const ConditionSpec&) = default;
};

/// Resolves a condition from its kind and visual delay. Throws ConfigError for
/// cells outside the experimental design (including asynchronous-250, whose
/// strict ordering haptic < visual can not hold).
ConditionSpec make_condition(ConditionKind kind, SimTime visual_delay, SimTime onset_delay = 0);

} // namespace telesim
