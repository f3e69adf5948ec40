#pragma once

#include "telesim/condition.hpp"
#include "telesim/sim_time.hpp"
#include "telesim/world.hpp"

#include <array>
#include <optional>
#include <string_view>

namespace telesim {

enum class ForceMode { weight, inertia, momentum, impact, texture, balance, rotation, vibration };

inline constexpr std::size_t kNumForceModes = 8;
std::string_view to_string(ForceMode mode);

struct ForceSample {
    Eigen::Vector3d force = Eigen::Vector3d::Zero(); // post-clamp, newtons
    double torque_z = 0.0;                           // newton-meters
    std::array<Eigen::Vector3d, kNumForceModes> mode_breakdown{};
    bool clamped = false;
    double timestamp = 0.0; // seconds

    ForceSample() { mode_breakdown.fill(Eigen::Vector3d::Zero()); }

    const Eigen::Vector3d& mode(ForceMode m) const { return mode_breakdown[static_cast<std::size_t>(m)]; }
    Eigen::Vector3d& mode(ForceMode m) { return mode_breakdown[static_cast<std::size_t>(m)]; }
    Eigen::Vector3d breakdown_sum() const;
    double magnitude() const { return force.norm(); }
};

struct HapticParams {
    double max_force = 5.0;            // actuator limit, N
    double gravity = 9.81;
    double texture_amplitude = 1.0;    // N per unit roughness
    double texture_frequency = 200.0;  // cycles per meter of sliding
    double balance_length = 0.1;       // m; lateral force = m g offset / balance_length
    double rotation_damping = 0.02;    // N m s / rad
    double vibration_amplitude = 0.5;  // N
    double vibration_frequency = 150.0; // Hz
};

/// Per-tick force from the world: weight, inertia, momentum/impact pulses,
/// texture, balance and rotation, summed and clamped to max_force.
ForceSample render_contact_forces(const WorldState& world, const Eigen::Vector3d& effector_velocity,
                                  const Eigen::Vector3d& effector_acceleration, double angular_velocity,
                                  const HapticParams& params = {});

/// Same, reading effector motion from the world state.
ForceSample render_contact_forces(const WorldState& world, const HapticParams& params = {});

/// Sets `force` from the breakdown sum, scaled into the actuator range.
void apply_clamp(ForceSample& sample, double max_force);

enum class CueStyle { vibration, simulated_force };
std::string_view to_string(CueStyle s);
CueStyle cue_style_from_string(std::string_view s);

/// Immediate haptic cue emitted at action initiation under the anchoring
/// condition. Produced only through haptic_onset_cue.
class OnsetCue {
  public:
    CueStyle style() const { return style_; }
    std::optional<SimTime> action_start() const { return action_start_; }
    double amplitude() const { return params_.vibration_amplitude; }
    double frequency() const { return params_.vibration_frequency; }

    /// Vibration: constant-amplitude sinusoid along z starting at the action
    /// timestamp (zero without an action). Simulated force: the local world's
    /// rendered forces, stamped with the action timestamp.
    ForceSample sample(SimTime now, const WorldState* local_world = nullptr) const;

  private:
    friend OnsetCue haptic_onset_cue(const ConditionSpec& condition, CueStyle style,
                                     std::optional<SimTime> action_start, const HapticParams& params);
    CueStyle style_ = CueStyle::vibration;
    std::optional<SimTime> action_start_;
    HapticParams params_;
};

/// Throws ConfigError when requested outside the anchoring condition.
OnsetCue haptic_onset_cue(const ConditionSpec& condition, CueStyle style,
                          std::optional<SimTime> action_start, const HapticParams& params = {});

} // namespace telesim
