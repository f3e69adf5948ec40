#pragma once

#include "telesim/condition.hpp"
#include "telesim/haptics.hpp"
#include "telesim/sim_time.hpp"
#include "telesim/world.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace telesim {

enum class PolicyVariant { continuous_pursuit, wait_for_confirmation, move_and_wait };
enum class ConfirmationChannel { visual, haptic, either };

std::string_view to_string(PolicyVariant v);
std::string_view to_string(ConfirmationChannel c);
PolicyVariant policy_variant_from_string(std::string_view s);
ConfirmationChannel confirmation_channel_from_string(std::string_view s);

struct OperatorPolicy {
    PolicyVariant variant = PolicyVariant::wait_for_confirmation;
    SimTime reaction_time = 200;   // ms
    SimTime reaction_jitter = 50;  // ms, uniform extra per reaction
    double speed_limit = 0.3;      // m/s
    double acceleration = 1.5;     // m/s^2
    double pursuit_gain = 1.0;     // 1/s, continuous_pursuit only
    double segment_length = 0.1;   // m, move_and_wait only
    double grip_force = 5.0;       // N commanded when closing
    double aim_noise = 0.003;      // m, std dev of the planar release point error
    ConfirmationChannel confirmation_channel = ConfirmationChannel::haptic;
    std::uint64_t seed = 1;

    void validate() const;
    friend bool operator==(const OperatorPolicy&, const OperatorPolicy&) = default;
};

/// Operator command for one operator tick.
struct OperatorInput {
    Eigen::Vector3d position_delta = Eigen::Vector3d::Zero();
    Eigen::Quaterniond rotation_delta = Eigen::Quaterniond::Identity();
    double grip_force = 0.0;
    SimTime timestamp = 0;
};

/// A delivered visual-channel snapshot and the sim time it was taken.
struct VisualFrame {
    SimTime emitted = 0;
    std::shared_ptr<const WorldState> world;
};

struct HapticFrame {
    SimTime emitted = 0;
    ForceSample sample;
};

/// Things the operator perceived or did, kept for the trial log.
struct OperatorNote {
    SimTime time = 0;
    std::string kind; // grasp_command, confirm_grasp, release_command, confirm_release, retry
    int cube_id = -1;
};

/// Synthetic operator closing the loop through the delayed channels. Moves are
/// planned on the commanded pose; waypoints come from delayed visual frames.
class ScriptedOperator {
  public:
    enum class Phase {
        await_scene,
        approach,
        descend,
        close,
        confirm_grasp,
        lift,
        transit,
        lower,
        verify_arrival,
        open,
        confirm_release,
        retreat,
        verify_placement,
        done
    };

    ScriptedOperator(const OperatorPolicy& policy, const Scene& scene, const ConditionSpec& condition,
                     const Pose& start_pose);

    OperatorInput step(const VisualFrame* visual, const HapticFrame* haptic, SimTime now);

    bool finished() const { return phase_ == Phase::done; }
    /// True while paused for feedback (confirmation, arrival or placement checks).
    bool waiting() const;
    Phase phase() const { return phase_; }
    const Eigen::Vector3d& commanded_position() const { return commanded_; }
    const OperatorPolicy& policy() const { return policy_; }
    std::vector<OperatorNote> take_notes();

  private:
    struct Motion {
        Eigen::Vector3d delta = Eigen::Vector3d::Zero();
        bool arrived = false;
    };

    Motion move_open_loop(const Eigen::Vector3d& goal, double dt);
    Motion move_pursuit(const Eigen::Vector3d& goal, const VisualFrame* visual, double dt);
    Motion move_segmented(const Eigen::Vector3d& goal, const VisualFrame* visual, SimTime now, double dt);
    Motion move(const Eigen::Vector3d& goal, const VisualFrame* visual, SimTime now, double dt);

    bool haptic_confirms(const HapticFrame* haptic, bool expect_load) const;
    bool visual_confirms(const VisualFrame* visual, bool expect_grasp) const;
    bool confirmed(const VisualFrame* visual, const HapticFrame* haptic, bool expect_grasp) const;
    SimTime reaction();
    void note(SimTime t, std::string kind);
    void plan_cube(const WorldState& seen);
    void enter(Phase p);

    OperatorPolicy policy_;
    Scene scene_;
    ConditionSpec condition_;
    Eigen::Vector3d commanded_;
    Phase phase_ = Phase::await_scene;
    std::size_t step_index_ = 0;
    double speed_ = 0.0;
    double grip_ = 0.0;
    SimTime last_time_ = 0;
    bool started_ = false;
    SimTime hold_until_ = 0;
    bool holding_ = false;
    SimTime action_time_ = 0; // last grip change or arrival
    Eigen::Vector3d segment_goal_ = Eigen::Vector3d::Zero();
    bool segment_active_ = false;

    Eigen::Vector3d hover_cube_, grasp_point_, lift_point_, hover_target_, place_point_, retreat_point_;

    std::mt19937_64 rng_;
    std::vector<OperatorNote> notes_;
};

std::string_view to_string(ScriptedOperator::Phase p);

/// One operator tick of a scripted policy.
OperatorInput policy_step(ScriptedOperator& op, const VisualFrame* delayed_visual,
                          const HapticFrame* delayed_haptic, SimTime now);

} // namespace telesim
