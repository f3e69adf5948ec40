#pragma once

#include "telesim/config.hpp"
#include "telesim/delay_pipeline.hpp"
#include "telesim/haptics.hpp"
#include "telesim/operator.hpp"
#include "telesim/trial_log.hpp"
#include "telesim/world.hpp"

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <variant>

namespace telesim {

/// Command-channel payload: the joint target from IK plus the grip force.
struct JointCommand {
    JointVector joints = JointVector::Zero();
    double grip_force = 0.0;
};

using ChannelPayload = std::variant<JointCommand, std::shared_ptr<const WorldState>, ForceSample>;

/// Source of operator inputs, polled once per operator tick.
class InputSource {
  public:
    virtual ~InputSource() = default;
    virtual OperatorInput next(const VisualFrame* visual, const HapticFrame* haptic, SimTime now) = 0;
    virtual bool finished() const { return false; }
    virtual bool waiting() const { return false; }
    virtual std::vector<OperatorNote> take_notes() { return {}; }
};

class ScriptedInput final : public InputSource {
  public:
    ScriptedInput(const TrialConfig& config, const Pose& start_pose);
    OperatorInput next(const VisualFrame* visual, const HapticFrame* haptic, SimTime now) override;
    bool finished() const override { return op_.finished(); }
    bool waiting() const override { return op_.waiting(); }
    std::vector<OperatorNote> take_notes() override { return op_.take_notes(); }
    const ScriptedOperator& op() const { return op_; }

  private:
    ScriptedOperator op_;
};

/// Inputs pushed from another thread (network worker). Everything queued
/// since the last operator tick is merged into one input.
class LiveInput final : public InputSource {
  public:
    void push(const OperatorInput& input);
    OperatorInput next(const VisualFrame* visual, const HapticFrame* haptic, SimTime now) override;

  private:
    std::mutex mutex_;
    std::deque<OperatorInput> queue_;
    double grip_ = 0.0;
};

/// Replays the logged inputs of a trial, one per operator tick.
class PlaybackInput final : public InputSource {
  public:
    explicit PlaybackInput(std::vector<InputRow> rows) : rows_(std::move(rows)) {}
    OperatorInput next(const VisualFrame* visual, const HapticFrame* haptic, SimTime now) override;
    bool waiting() const override { return waiting_; }

  private:
    std::vector<InputRow> rows_;
    std::size_t index_ = 0;
    bool waiting_ = false;
};

/// Seeded pupil model: a luminance response, a load response that follows
/// operator waiting with a per-subject latency, noise, artifacts and blinks.
class PupilSynthesizer {
  public:
    explicit PupilSynthesizer(std::uint64_t seed, int rate_hz);
    double sample(SimTime now, double luminance, bool waiting);
    SimTime latency() const { return latency_; }

  private:
    std::mt19937_64 rng_;
    double dt_;
    SimTime latency_;
    double load_ = 0.0;
    std::deque<double> load_history_;
    std::size_t lag_samples_;
    SimTime next_blink_ = 0;
    SimTime blink_end_ = -1;
};

/// Procedural top-down view of a delivered snapshot, for display luminance.
RgbFrame render_frame(const WorldState* world, SimTime now, int width = 64, int height = 48);

struct SessionHooks {
    std::function<void(const VisualFrame&, SimTime delivered)> on_visual;
    std::function<void(const HapticFrame&, SimTime delivered)> on_haptic;
    std::function<void(const EventRow&)> on_event;
};

struct RunOptions {
    bool record_ticks = true;
};

/// One trial's tick loop on the integer-ms clock. Each call to step() advances
/// one millisecond: world step, haptic render, visual snapshot at the visual
/// rate, channel delivery, and at the operator rate input -> IK -> command.
class Session {
  public:
    Session(const TrialConfig& config, std::unique_ptr<InputSource> input, RunOptions options = {});

    /// Runs one tick; returns false once the trial is over.
    bool step();
    bool done() const { return done_; }
    SimTime now() const { return now_; }
    const WorldState& world() const { return world_; }
    const TrialConfig& config() const { return config_; }
    InputSource& input() { return *input_; }
    void set_hooks(SessionHooks hooks) { hooks_ = std::move(hooks); }

    /// Ends the trial early, keeping what was recorded.
    void abort(const std::string& reason);
    TrialLog finish(std::optional<PostTrial> post = std::nullopt);

  private:
    void record_event(SimTime t, std::string kind, int object_id, double value);
    void deliver(SimTime t, std::vector<std::uint64_t>& delivered);
    void operator_tick(SimTime t, std::vector<std::uint64_t>& emitted);

    TrialConfig config_;
    RunOptions options_;
    WorldContext ctx_;
    WorldState world_;
    std::optional<WorldState> twin_; // local simulation ahead of the onset delay
    DelayPipeline<ChannelPayload> pipeline_;
    std::unique_ptr<InputSource> input_;
    SessionHooks hooks_;

    SimTime now_ = 0;
    SimTime end_ = 0;
    bool done_ = false;
    std::size_t next_visual_ = 0;

    JointCommand delivered_command_;
    JointCommand local_command_;
    Pose commanded_;
    std::optional<VisualFrame> latest_visual_;
    std::optional<HapticFrame> latest_haptic_;
    std::optional<SimTime> cue_start_;
    double last_grip_ = 0.0;
    std::map<std::uint64_t, std::size_t> frame_index_;

    std::optional<PupilSynthesizer> pupil_;
    TrialLog log_;
};

/// Runs a scripted trial headless.
TrialLog run_trial(const TrialConfig& config, RunOptions options = {});

/// Re-runs a logged trial: scripted trials from config and seed, live trials by
/// playing back their recorded inputs.
TrialLog replay(const TrialLog& log);

TrialConfig config_of(const TrialLog& log);

} // namespace telesim
