#include "telesim/operator.hpp"

#include "telesim/errors.hpp"

#include <algorithm>
#include <cmath>

namespace telesim {

namespace {

constexpr double kArrivalTolerance = 0.003;  // m, pursuit arrival on the visual channel
constexpr double kVerifyTolerance = 0.01;    // m, visual arrival check before release
constexpr double kReleaseClearance = 0.005;  // m above the floor

} // namespace

std::string_view to_string(PolicyVariant v) {
    switch (v) {
    case PolicyVariant::continuous_pursuit: return "continuous_pursuit";
    case PolicyVariant::wait_for_confirmation: return "wait_for_confirmation";
    case PolicyVariant::move_and_wait: return "move_and_wait";
    }
    return "wait_for_confirmation";
}

std::string_view to_string(ConfirmationChannel c) {
    switch (c) {
    case ConfirmationChannel::visual: return "visual";
    case ConfirmationChannel::haptic: return "haptic";
    case ConfirmationChannel::either: return "either";
    }
    return "haptic";
}

PolicyVariant policy_variant_from_string(std::string_view s) {
    for (auto v : {PolicyVariant::continuous_pursuit, PolicyVariant::wait_for_confirmation,
                   PolicyVariant::move_and_wait}) {
        if (to_string(v) == s) return v;
    }
    throw ConfigError("unknown operator policy '" + std::string(s) + "'");
}

ConfirmationChannel confirmation_channel_from_string(std::string_view s) {
    for (auto c : {ConfirmationChannel::visual, ConfirmationChannel::haptic, ConfirmationChannel::either}) {
        if (to_string(c) == s) return c;
    }
    throw ConfigError("unknown confirmation channel '" + std::string(s) + "'");
}

std::string_view to_string(ScriptedOperator::Phase p) {
    using P = ScriptedOperator::Phase;
    switch (p) {
    case P::await_scene: return "await_scene";
    case P::approach: return "approach";
    case P::descend: return "descend";
    case P::close: return "close";
    case P::confirm_grasp: return "confirm_grasp";
    case P::lift: return "lift";
    case P::transit: return "transit";
    case P::lower: return "lower";
    case P::verify_arrival: return "verify_arrival";
    case P::open: return "open";
    case P::confirm_release: return "confirm_release";
    case P::retreat: return "retreat";
    case P::verify_placement: return "verify_placement";
    case P::done: return "done";
    }
    return "done";
}

void OperatorPolicy::validate() const {
    if (reaction_time < 0 || reaction_jitter < 0) throw ConfigError("reaction time must be >= 0");
    if (!(speed_limit > 0.0)) throw ConfigError("speed limit must be > 0");
    if (!(acceleration > 0.0)) throw ConfigError("acceleration must be > 0");
    if (!(pursuit_gain > 0.0)) throw ConfigError("pursuit gain must be > 0");
    if (!(segment_length > 0.0)) throw ConfigError("segment length must be > 0");
    if (!(grip_force >= 0.0)) throw ConfigError("grip force must be >= 0");
    if (!(aim_noise >= 0.0)) throw ConfigError("aim noise must be >= 0");
}

ScriptedOperator::ScriptedOperator(const OperatorPolicy& policy, const Scene& scene,
                                   const ConditionSpec& condition, const Pose& start_pose)
    : policy_(policy), scene_(scene), condition_(condition), commanded_(start_pose.position),
      rng_(policy.seed) {
    policy_.validate();
}

bool ScriptedOperator::waiting() const {
    switch (phase_) {
    case Phase::await_scene:
    case Phase::confirm_grasp:
    case Phase::confirm_release:
    case Phase::verify_arrival:
    case Phase::verify_placement:
        return true;
    default:
        return holding_;
    }
}

std::vector<OperatorNote> ScriptedOperator::take_notes() {
    std::vector<OperatorNote> out;
    out.swap(notes_);
    return out;
}

SimTime ScriptedOperator::reaction() {
    // raw engine output keeps the draw sequence identical across standard libraries
    const auto span = static_cast<std::uint64_t>(policy_.reaction_jitter) + 1;
    return policy_.reaction_time + static_cast<SimTime>(rng_() % span);
}

void ScriptedOperator::note(SimTime t, std::string kind) {
    const int cube = step_index_ < scene_.script.steps.size() ? scene_.script.steps[step_index_].cube_id : -1;
    notes_.push_back({t, std::move(kind), cube});
}

void ScriptedOperator::enter(Phase p) {
    phase_ = p;
    speed_ = 0.0;
    segment_active_ = false;
}

void ScriptedOperator::plan_cube(const WorldState& seen) {
    const TaskStep& step = scene_.script.steps[step_index_];
    const SceneObject* cube = seen.find(step.cube_id);
    const SceneObject* target = seen.find(step.target_id);
    if (!cube || !target) {
        throw ConfigError("visual frame lacks scripted cube or target");
    }
    const double h = scene_.transit_height;
    const Eigen::Vector3d c = cube->pose.position;
    const Eigen::Vector3d t = target->pose.position;
    hover_cube_ = {c.x(), c.y(), h};
    grasp_point_ = {c.x(), c.y(), std::max(c.z(), cube->half_extents.z())};
    lift_point_ = hover_cube_;
    hover_target_ = {t.x(), t.y(), h};
    std::normal_distribution<double> aim(0.0, policy_.aim_noise);
    const double ex = policy_.aim_noise > 0.0 ? aim(rng_) : 0.0;
    const double ey = policy_.aim_noise > 0.0 ? aim(rng_) : 0.0;
    place_point_ = {t.x() + ex, t.y() + ey, t.z() - target->half_extents.z() + cube->half_extents.z() + kReleaseClearance};
    retreat_point_ = hover_target_;
}

ScriptedOperator::Motion ScriptedOperator::move_open_loop(const Eigen::Vector3d& goal, double dt) {
    Motion m;
    const Eigen::Vector3d diff = goal - commanded_;
    const double dist = diff.norm();
    if (dist <= 1e-9) {
        speed_ = 0.0;
        m.arrived = true;
        return m;
    }
    const double a = policy_.acceleration;
    const double speed = std::min({policy_.speed_limit, speed_ + a * dt, std::sqrt(2.0 * a * dist)});
    const double step = std::min(speed * dt, dist);
    m.delta = diff * (step / dist);
    commanded_ += m.delta;
    speed_ = speed;
    if (step >= dist) {
        commanded_ = goal;
        speed_ = 0.0;
        m.arrived = true;
    }
    return m;
}

ScriptedOperator::Motion ScriptedOperator::move_pursuit(const Eigen::Vector3d& goal, const VisualFrame* visual,
                                                        double dt) {
    Motion m;
    if (!visual) return m;
    const Eigen::Vector3d e = goal - visual->world->end_effector.position;
    const double dist = e.norm();
    if (dist < kArrivalTolerance) {
        speed_ = 0.0;
        m.arrived = true;
        return m;
    }
    const double a = policy_.acceleration;
    const double desired = std::min({policy_.speed_limit, policy_.pursuit_gain * dist, std::sqrt(2.0 * a * dist)});
    const double speed = std::min(desired, speed_ + a * dt);
    m.delta = e * (speed * dt / dist);
    commanded_ += m.delta;
    speed_ = speed;
    return m;
}

ScriptedOperator::Motion ScriptedOperator::move_segmented(const Eigen::Vector3d& goal, const VisualFrame* visual,
                                                          SimTime now, double dt) {
    if (!segment_active_) {
        // re-plan from what the delayed camera shows once the previous move settled
        const Eigen::Vector3d from = visual ? visual->world->end_effector.position : commanded_;
        const Eigen::Vector3d diff = goal - from;
        const double dist = diff.norm();
        segment_goal_ = dist <= policy_.segment_length ? goal : Eigen::Vector3d(commanded_ + diff * (policy_.segment_length / dist));
        if ((goal - commanded_).norm() <= policy_.segment_length) segment_goal_ = goal;
        segment_active_ = true;
    }
    Motion m = move_open_loop(segment_goal_, dt);
    if (m.arrived) {
        segment_active_ = false;
        holding_ = true;
        hold_until_ = now + condition_.visual_delay + reaction();
        m.arrived = segment_goal_ == goal;
    }
    return m;
}

ScriptedOperator::Motion ScriptedOperator::move(const Eigen::Vector3d& goal, const VisualFrame* visual,
                                                SimTime now, double dt) {
    switch (policy_.variant) {
    case PolicyVariant::continuous_pursuit: return move_pursuit(goal, visual, dt);
    case PolicyVariant::move_and_wait: return move_segmented(goal, visual, now, dt);
    case PolicyVariant::wait_for_confirmation: break;
    }
    return move_open_loop(goal, dt);
}

bool ScriptedOperator::haptic_confirms(const HapticFrame* haptic, bool expect_load) const {
    if (!haptic || haptic->emitted <= action_time_) return false;
    const ForceSample& s = haptic->sample;
    const bool loaded = s.mode(ForceMode::weight).norm() > 0.1 || s.mode(ForceMode::vibration).norm() > 0.0;
    if (expect_load) return loaded;
    return haptic->emitted > action_time_ + condition_.onset_delay && s.mode(ForceMode::weight).norm() == 0.0;
}

bool ScriptedOperator::visual_confirms(const VisualFrame* visual, bool expect_grasp) const {
    if (!visual || visual->emitted <= action_time_ + condition_.onset_delay) return false;
    const bool bound = visual->world->grasp_binding.has_value();
    return expect_grasp ? bound : !bound;
}

bool ScriptedOperator::confirmed(const VisualFrame* visual, const HapticFrame* haptic, bool expect_grasp) const {
    switch (policy_.confirmation_channel) {
    case ConfirmationChannel::visual: return visual_confirms(visual, expect_grasp);
    case ConfirmationChannel::haptic: return haptic_confirms(haptic, expect_grasp);
    case ConfirmationChannel::either:
        return visual_confirms(visual, expect_grasp) || haptic_confirms(haptic, expect_grasp);
    }
    return false;
}

OperatorInput ScriptedOperator::step(const VisualFrame* visual, const HapticFrame* haptic, SimTime now) {
    const double dt = started_ ? to_seconds(now - last_time_) : 0.0;
    last_time_ = now;
    started_ = true;

    OperatorInput in;
    in.timestamp = now;
    auto finish = [&](const Eigen::Vector3d& delta) {
        in.position_delta = delta;
        in.grip_force = grip_;
        return in;
    };

    if (holding_) {
        if (now < hold_until_) return finish(Eigen::Vector3d::Zero());
        holding_ = false;
    }

    const SimTime confirm_timeout =
        2 * (condition_.visual_delay + condition_.haptic_delay + condition_.onset_delay) + 3000;
    auto retry = [&]() {
        note(now, "retry");
        grip_ = 0.0;
        if (visual) plan_cube(*visual->world);
        enter(Phase::approach);
        holding_ = true;
        hold_until_ = now + reaction();
    };
    auto react_into = [&](Phase next, SimTime extra) {
        enter(next);
        holding_ = true;
        hold_until_ = now + extra + reaction();
    };
    const bool confirming = policy_.variant == PolicyVariant::wait_for_confirmation;
    const SimTime post_grip_wait = policy_.variant == PolicyVariant::move_and_wait ? condition_.visual_delay : 0;

    switch (phase_) {
    case Phase::await_scene:
        if (visual) {
            plan_cube(*visual->world);
            enter(Phase::approach);
        }
        return finish(Eigen::Vector3d::Zero());
    case Phase::approach: {
        const Motion m = move(hover_cube_, visual, now, dt);
        if (m.arrived) enter(Phase::descend);
        return finish(m.delta);
    }
    case Phase::descend: {
        const Motion m = move(grasp_point_, visual, now, dt);
        if (m.arrived) enter(Phase::close);
        return finish(m.delta);
    }
    case Phase::close:
        grip_ = policy_.grip_force;
        action_time_ = now;
        note(now, "grasp_command");
        if (confirming) {
            enter(Phase::confirm_grasp);
        } else {
            react_into(Phase::lift, post_grip_wait);
        }
        return finish(Eigen::Vector3d::Zero());
    case Phase::confirm_grasp:
        if (confirmed(visual, haptic, true)) {
            note(now, "confirm_grasp");
            react_into(Phase::lift, 0);
        } else if (now - action_time_ > confirm_timeout) {
            retry();
        }
        return finish(Eigen::Vector3d::Zero());
    case Phase::lift: {
        const Motion m = move(lift_point_, visual, now, dt);
        if (m.arrived) enter(Phase::transit);
        return finish(m.delta);
    }
    case Phase::transit: {
        const Motion m = move(hover_target_, visual, now, dt);
        if (m.arrived) enter(Phase::lower);
        return finish(m.delta);
    }
    case Phase::lower: {
        const Motion m = move(place_point_, visual, now, dt);
        if (m.arrived) {
            action_time_ = now;
            enter(confirming ? Phase::verify_arrival : Phase::open);
        }
        return finish(m.delta);
    }
    case Phase::verify_arrival:
        if (visual && visual->emitted >= action_time_ + condition_.onset_delay &&
            (visual->world->end_effector.position - place_point_).norm() < kVerifyTolerance) {
            react_into(Phase::open, 0);
        } else if (now - action_time_ > confirm_timeout) {
            enter(Phase::open);
        }
        return finish(Eigen::Vector3d::Zero());
    case Phase::open:
        grip_ = 0.0;
        action_time_ = now;
        note(now, "release_command");
        if (confirming) {
            enter(Phase::confirm_release);
        } else {
            react_into(Phase::retreat, post_grip_wait);
        }
        return finish(Eigen::Vector3d::Zero());
    case Phase::confirm_release:
        if (confirmed(visual, haptic, false) || now - action_time_ > confirm_timeout) {
            note(now, "confirm_release");
            react_into(Phase::retreat, 0);
        }
        return finish(Eigen::Vector3d::Zero());
    case Phase::retreat: {
        const Motion m = move(retreat_point_, visual, now, dt);
        if (m.arrived) enter(Phase::verify_placement);
        return finish(m.delta);
    }
    case Phase::verify_placement:
        if (visual && visual->emitted > action_time_ + condition_.onset_delay) {
            const WorldState& seen = *visual->world;
            if (seen.script_index > step_index_) {
                step_index_ = seen.script_index;
                if (step_index_ >= scene_.script.steps.size()) {
                    enter(Phase::done);
                } else {
                    plan_cube(seen);
                    enter(Phase::approach);
                }
            } else {
                retry();
            }
        }
        return finish(Eigen::Vector3d::Zero());
    case Phase::done:
        return finish(Eigen::Vector3d::Zero());
    }
    return finish(Eigen::Vector3d::Zero());
}

OperatorInput policy_step(ScriptedOperator& op, const VisualFrame* delayed_visual,
                          const HapticFrame* delayed_haptic, SimTime now) {
    return op.step(delayed_visual, delayed_haptic, now);
}

} // namespace telesim
