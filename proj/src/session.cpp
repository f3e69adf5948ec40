#include "telesim/session.hpp"

#include "telesim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace telesim {

// ---- input sources -------------------------------------------------------------------

namespace {

OperatorPolicy seeded(OperatorPolicy p, std::uint64_t seed) {
    p.seed = seed;
    return p;
}

} // namespace

ScriptedInput::ScriptedInput(const TrialConfig& config, const Pose& start_pose)
    : op_(seeded(config.policy, config.seed), config.scene, config.condition, start_pose) {}

OperatorInput ScriptedInput::next(const VisualFrame* visual, const HapticFrame* haptic, SimTime now) {
    return policy_step(op_, visual, haptic, now);
}

void LiveInput::push(const OperatorInput& input) {
    std::lock_guard lock(mutex_);
    queue_.push_back(input);
}

OperatorInput LiveInput::next(const VisualFrame*, const HapticFrame*, SimTime now) {
    std::deque<OperatorInput> pending;
    {
        std::lock_guard lock(mutex_);
        pending.swap(queue_);
    }
    OperatorInput merged;
    merged.timestamp = now;
    for (const OperatorInput& in : pending) {
        merged.position_delta += in.position_delta;
        merged.rotation_delta = (in.rotation_delta * merged.rotation_delta).normalized();
        grip_ = in.grip_force;
    }
    merged.grip_force = grip_;
    return merged;
}

OperatorInput PlaybackInput::next(const VisualFrame*, const HapticFrame*, SimTime now) {
    if (index_ >= rows_.size()) {
        throw InputError("recorded inputs ended before the trial did (t=" + std::to_string(now) + ")");
    }
    const InputRow& r = rows_[index_++];
    if (r.t != now) {
        throw InputError("recorded input at t=" + std::to_string(r.t) + " does not match operator tick " +
                         std::to_string(now));
    }
    waiting_ = r.waiting;
    OperatorInput in;
    in.position_delta = r.position_delta;
    in.rotation_delta = r.rotation_delta;
    in.grip_force = r.grip_force;
    in.timestamp = now;
    return in;
}

// ---- synthetic pupil ---------------------------------------------------------------------

namespace {

constexpr double kPupilBase = 3.0;        // mm
constexpr double kPupilLightRange = 2.0;  // mm between dark and bright adaptation
constexpr double kPupilLightRate = 0.015; // per luminance unit
constexpr double kPupilLoadGain = 0.4;    // mm at sustained waiting
constexpr double kPupilLoadTau = 1.0;     // s
constexpr double kPupilNoise = 0.015;     // mm

} // namespace

PupilSynthesizer::PupilSynthesizer(std::uint64_t seed, int rate_hz)
    : rng_(seed ^ 0x5deece66dULL), dt_(1.0 / rate_hz) {
    latency_ = 200 + static_cast<SimTime>(rng_() % 201);
    lag_samples_ = static_cast<std::size_t>(std::llround(static_cast<double>(latency_) * rate_hz / 1000.0));
    std::exponential_distribution<double> gap(1.0 / 4000.0);
    next_blink_ = 2000 + static_cast<SimTime>(gap(rng_));
}

double PupilSynthesizer::sample(SimTime now, double luminance, bool waiting) {
    std::normal_distribution<double> noise(0.0, kPupilNoise);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double n = noise(rng_);
    const double artifact = unit(rng_) < 0.003 ? 0.8 : 0.0;

    load_ += ((waiting ? 1.0 : 0.0) - load_) * dt_ / kPupilLoadTau;
    load_history_.push_back(load_);
    if (load_history_.size() > lag_samples_ + 1) load_history_.pop_front();
    const double lagged = load_history_.size() > lag_samples_ ? load_history_.front() : 0.0;

    if (now >= next_blink_ && now >= blink_end_) {
        std::uniform_int_distribution<SimTime> duration(150, 700);
        std::exponential_distribution<double> gap(1.0 / 4000.0);
        blink_end_ = now + duration(rng_);
        next_blink_ = blink_end_ + 1000 + static_cast<SimTime>(gap(rng_));
    }
    if (now < blink_end_) return kMissing;

    return kPupilBase + kPupilLightRange * std::exp(-kPupilLightRate * luminance) + kPupilLoadGain * lagged + n +
           artifact;
}

RgbFrame render_frame(const WorldState* world, SimTime now, int width, int height) {
    RgbFrame f(width, height);
    const double t = static_cast<double>(now);
    const double bg = 60.0 + 60.0 * (0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * t / 13000.0)) +
                      ((now / 9000) % 2 ? 60.0 : 0.0);
    auto set = [&](int x, int y, double r, double g, double b) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
        f.rgb[i] = static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
        f.rgb[i + 1] = static_cast<std::uint8_t>(std::clamp(g, 0.0, 255.0));
        f.rgb[i + 2] = static_cast<std::uint8_t>(std::clamp(b, 0.0, 255.0));
    };
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) set(x, y, bg, bg, 0.95 * bg);
    }
    if (!world) return f;

    // top-down view of x in [0.2, 0.8], y in [-0.45, 0.45]
    auto col = [&](double x) { return static_cast<int>(std::floor((x - 0.2) / 0.6 * width)); };
    auto row = [&](double y) { return static_cast<int>(std::floor((y + 0.45) / 0.9 * height)); };
    auto fill = [&](const Eigen::Vector3d& c, const Eigen::Vector3d& half, double r, double g, double b) {
        for (int y = row(c.y() - half.y()); y <= row(c.y() + half.y()); ++y) {
            for (int x = col(c.x() - half.x()); x <= col(c.x() + half.x()); ++x) set(x, y, r, g, b);
        }
    };
    for (const SceneObject& o : world->objects) {
        switch (o.tag) {
        case ObjectTag::target: fill(o.pose.position, o.half_extents, 230, 230, 200); break;
        case ObjectTag::obstacle: fill(o.pose.position, o.half_extents, 70, 45, 30); break;
        default: break;
        }
    }
    for (const SceneObject& o : world->objects) {
        switch (o.tag) {
        case ObjectTag::grey: fill(o.pose.position, o.half_extents, 128, 128, 128); break;
        case ObjectTag::green: fill(o.pose.position, o.half_extents, 40, 180, 60); break;
        case ObjectTag::blue: fill(o.pose.position, o.half_extents, 40, 70, 200); break;
        case ObjectTag::purple: fill(o.pose.position, o.half_extents, 140, 60, 170); break;
        default: break;
        }
    }
    fill(world->end_effector.position, Eigen::Vector3d(0.01, 0.01, 0.01), 255, 255, 255);
    return f;
}

// ---- session ---------------------------------------------------------------------------

namespace {

WorldContext make_context(const TrialConfig& config) {
    WorldContext ctx;
    ctx.arm = config.arm_model();
    ctx.script = config.scene.script;
    ctx.params = config.world;
    return ctx;
}

} // namespace

Session::Session(const TrialConfig& config, std::unique_ptr<InputSource> input, RunOptions options)
    : config_(config), options_(options), ctx_(make_context(config)),
      world_(make_world(ctx_, config_.scene, ready_configuration())), pipeline_(config.condition),
      input_(std::move(input)) {
    validate_scene(config_.scene);
    if (!input_) throw ConfigError("session needs an input source");
    if (config_.condition.kind == ConditionKind::anchoring && config_.condition.onset_delay > 0) twin_ = world_;
    delivered_command_.joints = world_.robot_joints.angles;
    local_command_ = delivered_command_;
    commanded_ = world_.end_effector;
    end_ = config_.duration_cap_ms();
    done_ = end_ <= 0;
    if (config_.synthetic_pupil) pupil_.emplace(config_.seed, config_.visual_rate_hz);
    log_.config = config_to_json(config_);
    log_.ticks_recorded = options_.record_ticks;
}

void Session::record_event(SimTime t, std::string kind, int object_id, double value) {
    log_.events.push_back({t, std::move(kind), object_id, value});
    if (hooks_.on_event) hooks_.on_event(log_.events.back());
}

void Session::deliver(SimTime t, std::vector<std::uint64_t>& delivered) {
    for (auto& ev : pipeline_.drain_due(t)) {
        delivered.push_back(ev.sequence);
        if (auto* cmd = std::get_if<JointCommand>(&ev.payload)) {
            delivered_command_ = *cmd;
        } else if (auto* snap = std::get_if<std::shared_ptr<const WorldState>>(&ev.payload)) {
            latest_visual_ = VisualFrame{ev.emit_time, *snap};
            if (auto it = frame_index_.find(ev.sequence); it != frame_index_.end()) {
                log_.frames[it->second].delivered = t;
                frame_index_.erase(it);
            }
            if (hooks_.on_visual) hooks_.on_visual(*latest_visual_, t);
        } else if (auto* force = std::get_if<ForceSample>(&ev.payload)) {
            latest_haptic_ = HapticFrame{ev.emit_time, *force};
            if (hooks_.on_haptic) hooks_.on_haptic(*latest_haptic_, t);
        }
    }
}

void Session::operator_tick(SimTime t, std::vector<std::uint64_t>& emitted) {
    const OperatorInput in = input_->next(latest_visual_ ? &*latest_visual_ : nullptr,
                                          latest_haptic_ ? &*latest_haptic_ : nullptr, t);
    for (const OperatorNote& n : input_->take_notes()) record_event(n.time, n.kind, n.cube_id, 0.0);

    const TaskWorkspace box;
    commanded_.position = (commanded_.position + in.position_delta).cwiseMax(box.min_corner).cwiseMin(box.max_corner);
    commanded_.orientation = (in.rotation_delta * commanded_.orientation).normalized();

    JointCommand cmd;
    cmd.grip_force = in.grip_force;
    bool ik_ok = true;
    JointState seed;
    seed.angles = local_command_.joints;
    try {
        cmd.joints = solve_ik(ctx_.arm, commanded_, seed).angles;
    } catch (const ConvergenceError& e) {
        ik_ok = false;
        cmd.joints = local_command_.joints;
        record_event(t, "ik_failure", -1, e.position_residual());
    }
    if (config_.onset_cue && (in.grip_force >= ctx_.params.grasp_force_threshold) !=
                                 (last_grip_ >= ctx_.params.grasp_force_threshold)) {
        cue_start_ = t;
    }
    last_grip_ = in.grip_force;
    local_command_ = cmd;
    const std::uint64_t seq = pipeline_.enqueue(cmd, Channel::command, t);
    emitted.push_back(seq);

    const bool waiting = input_->waiting();
    log_.inputs.push_back({t, in.position_delta, in.rotation_delta, in.grip_force, seq, ik_ok, waiting});

    if (pupil_) {
        const RgbFrame frame = render_frame(latest_visual_ ? latest_visual_->world.get() : nullptr, t);
        const double lum = frame_luminance(frame);
        PupilSample s;
        s.timestamp = t;
        s.luminance = lum;
        s.diameter = pupil_->sample(t, lum, waiting);
        log_.pupil.push_back(s);
    }
}

bool Session::step() {
    if (done_) return false;
    const SimTime t = now_;
    std::vector<std::uint64_t> emitted;
    std::vector<std::uint64_t> delivered;

    if (t > 0) {
        JointState cmd;
        cmd.angles = delivered_command_.joints;
        world_ = step_world(ctx_, world_, cmd, delivered_command_.grip_force, 0.001);
        for (const WorldEvent& e : world_.events) {
            record_event(t, std::string(to_string(e.kind)), e.object_id, e.value);
        }
        if (twin_) {
            JointState local;
            local.angles = local_command_.joints;
            twin_ = step_world(ctx_, *twin_, local, local_command_.grip_force, 0.001);
        }
    }

    const WorldState& source = twin_ ? *twin_ : world_;
    ForceSample sample = render_contact_forces(source, config_.haptics);
    sample.timestamp = to_seconds(t);
    if (config_.onset_cue && cue_start_ && t < *cue_start_ + config_.cue_duration) {
        const OnsetCue cue = haptic_onset_cue(config_.condition, *config_.onset_cue, cue_start_, config_.haptics);
        if (cue.style() == CueStyle::vibration) {
            sample.mode(ForceMode::vibration) += cue.sample(t).mode(ForceMode::vibration);
            apply_clamp(sample, config_.haptics.max_force);
        } else {
            sample = cue.sample(t, &source);
        }
    }
    emitted.push_back(pipeline_.enqueue(sample, Channel::haptic, t));

    const bool visual_tick = t == periodic_tick_time(static_cast<SimTime>(next_visual_), config_.visual_rate_hz);
    if (visual_tick) {
        auto snapshot = std::make_shared<const WorldState>(world_);
        const std::uint64_t seq = pipeline_.enqueue(std::move(snapshot), Channel::visual, t);
        emitted.push_back(seq);
        frame_index_[seq] = log_.frames.size();
        log_.frames.push_back({seq, t, std::nullopt});
        ++next_visual_;
    }

    deliver(t, delivered);
    if (visual_tick) {
        operator_tick(t, emitted);
        deliver(t, delivered); // zero onset delay applies the command on the next step
    }

    if (options_.record_ticks) {
        TickRow r;
        r.t = t;
        r.q = world_.robot_joints.angles;
        r.aperture = world_.robot_joints.gripper_aperture;
        r.ee_position = world_.end_effector.position;
        r.ee_orientation = world_.end_effector.orientation;
        r.grasp = world_.grasp_binding.value_or(-1);
        r.script_index = world_.script_index;
        r.emitted = std::move(emitted);
        r.delivered = std::move(delivered);
        r.force = sample.force;
        r.torque_z = sample.torque_z;
        r.clamped = sample.clamped;
        log_.ticks.push_back(std::move(r));
    }

    ++now_;
    if ((config_.stop_on_completion && world_.task_complete(ctx_.script)) || now_ >= end_) done_ = true;
    return !done_;
}

void Session::abort(const std::string& reason) {
    if (log_.aborted) return;
    log_.aborted = true;
    log_.abort_reason = reason;
    record_event(now_, "aborted", -1, 0.0);
    done_ = true;
}

TrialLog Session::finish(std::optional<PostTrial> post) {
    done_ = true;
    log_.duration = now_;
    log_.high_water = {pipeline_.high_water_mark(Channel::command), pipeline_.high_water_mark(Channel::visual),
                       pipeline_.high_water_mark(Channel::haptic)};
    log_.post = post ? post : config_.questionnaire;
    return std::move(log_);
}

TrialLog run_trial(const TrialConfig& config, RunOptions options) {
    if (config.mode != OperatorMode::scripted) throw ConfigError("headless runs need a scripted operator");
    const Pose start = forward_kinematics(config.arm_model(), JointState{ready_configuration(), 0.0, 0.0});
    Session session(config, std::make_unique<ScriptedInput>(config, start), options);
    while (session.step()) {
    }
    return session.finish();
}

TrialConfig config_of(const TrialLog& log) { return config_from_json(log.config); }

TrialLog replay(const TrialLog& log) {
    TrialConfig config = config_of(log);
    RunOptions options;
    options.record_ticks = log.ticks_recorded;
    // the recorded length wins over the cap and completion rule
    config.stop_on_completion = false;
    config.duration_cap_s = static_cast<double>(log.duration) / 1000.0;

    std::unique_ptr<InputSource> input;
    if (config.mode == OperatorMode::scripted) {
        const Pose start = forward_kinematics(config.arm_model(), JointState{ready_configuration(), 0.0, 0.0});
        input = std::make_unique<ScriptedInput>(config, start);
    } else {
        input = std::make_unique<PlaybackInput>(log.inputs);
    }
    Session session(config, std::move(input), options);
    while (session.step()) {
    }
    if (log.aborted) session.abort(log.abort_reason);
    TrialLog out = session.finish(log.post);
    out.config = log.config;
    return out;
}

} // namespace telesim
