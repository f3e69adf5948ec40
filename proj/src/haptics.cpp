#include "telesim/haptics.hpp"

#include "telesim/errors.hpp"

#include <cmath>
#include <numbers>

namespace telesim {

std::string_view to_string(ForceMode mode) {
    switch (mode) {
    case ForceMode::weight: return "weight";
    case ForceMode::inertia: return "inertia";
    case ForceMode::momentum: return "momentum";
    case ForceMode::impact: return "impact";
    case ForceMode::texture: return "texture";
    case ForceMode::balance: return "balance";
    case ForceMode::rotation: return "rotation";
    case ForceMode::vibration: return "vibration";
    }
    return "weight";
}

std::string_view to_string(CueStyle s) { return s == CueStyle::vibration ? "vibration" : "simulated_force"; }

CueStyle cue_style_from_string(std::string_view s) {
    if (s == "vibration") return CueStyle::vibration;
    if (s == "simulated_force") return CueStyle::simulated_force;
    throw ConfigError("unknown onset cue style '" + std::string(s) + "'");
}

Eigen::Vector3d ForceSample::breakdown_sum() const {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (const auto& f : mode_breakdown) sum += f;
    return sum;
}

void apply_clamp(ForceSample& sample, double max_force) {
    const Eigen::Vector3d raw = sample.breakdown_sum();
    const double mag = raw.norm();
    if (mag > max_force) {
        sample.force = raw * (max_force / mag);
        sample.clamped = true;
    } else {
        sample.force = raw;
        sample.clamped = false;
    }
}

ForceSample render_contact_forces(const WorldState& world, const Eigen::Vector3d& effector_velocity,
                                  const Eigen::Vector3d& effector_acceleration, double angular_velocity,
                                  const HapticParams& params) {
    ForceSample s;
    s.timestamp = world.time;
    const SceneObject* held = world.grasp_binding ? world.find(*world.grasp_binding) : nullptr;
    if (held == nullptr) {
        return s;
    }
    const double m = held->mass;

    s.mode(ForceMode::weight) = {0.0, 0.0, -m * params.gravity};
    s.mode(ForceMode::inertia) = -m * effector_acceleration;

    Eigen::Vector3d offset = held->pose.position - world.end_effector.position;
    offset.z() = 0.0;
    s.mode(ForceMode::balance) = (m * params.gravity / params.balance_length) * offset;

    s.torque_z = -params.rotation_damping * angular_velocity;

    for (const auto& pulse : world.pulses) {
        const double age = world.time - pulse.start;
        if (age < -1e-9 || age >= pulse.duration - 1e-9) continue;
        s.mode(pulse.kind == PulseKind::momentum ? ForceMode::momentum : ForceMode::impact) += pulse.force;
    }

    for (const auto& c : world.contacts) {
        if (c.a != held->id && c.b != held->id) continue;
        const int other_id = c.a == held->id ? c.b : c.a;
        const SceneObject* other = world.find(other_id);
        const Eigen::Vector3d other_v = other ? other->velocity : Eigen::Vector3d::Zero();
        const Eigen::Vector3d rel = effector_velocity - other_v;
        const Eigen::Vector3d tangential = rel - rel.dot(c.normal) * c.normal;
        const double speed = tangential.norm();
        if (speed == 0.0) continue;
        const double phase = 2.0 * std::numbers::pi * params.texture_frequency * c.sliding_distance;
        s.mode(ForceMode::texture) +=
            params.texture_amplitude * c.roughness * std::sin(phase) * (-tangential / speed);
    }

    apply_clamp(s, params.max_force);
    return s;
}

ForceSample render_contact_forces(const WorldState& world, const HapticParams& params) {
    return render_contact_forces(world, world.effector_velocity, world.effector_acceleration,
                                 world.effector_yaw_rate, params);
}

ForceSample OnsetCue::sample(SimTime now, const WorldState* local_world) const {
    ForceSample s;
    s.timestamp = to_seconds(now);
    if (!action_start_ || now < *action_start_) {
        return s;
    }
    if (style_ == CueStyle::vibration) {
        const double t = to_seconds(now - *action_start_);
        s.mode(ForceMode::vibration) = {
            0.0, 0.0,
            params_.vibration_amplitude * std::sin(2.0 * std::numbers::pi * params_.vibration_frequency * t)};
        apply_clamp(s, params_.max_force);
        return s;
    }
    if (local_world == nullptr) {
        return s;
    }
    s = render_contact_forces(*local_world, params_);
    s.timestamp = to_seconds(*action_start_);
    return s;
}

OnsetCue haptic_onset_cue(const ConditionSpec& condition, CueStyle style,
                          std::optional<SimTime> action_start, const HapticParams& params) {
    if (condition.kind != ConditionKind::anchoring) {
        throw ConfigError("onset cue requested under the " + std::string(to_string(condition.kind)) +
                          " condition; only anchoring emits onset cues");
    }
    OnsetCue cue;
    cue.style_ = style;
    cue.action_start_ = action_start;
    cue.params_ = params;
    return cue;
}

} // namespace telesim
