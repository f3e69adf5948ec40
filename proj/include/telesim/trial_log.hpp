#pragma once

#include "telesim/config.hpp"
#include "telesim/kinematics.hpp"
#include "telesim/pupil.hpp"
#include "telesim/sim_time.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace telesim {

inline constexpr const char* kLogFormat = "telesim-trial-log";
inline constexpr int kLogVersion = 1;

/// One 1 kHz simulation tick.
struct TickRow {
    SimTime t = 0;
    JointVector q = JointVector::Zero();
    double aperture = 0.0;
    Eigen::Vector3d ee_position = Eigen::Vector3d::Zero();
    Eigen::Quaterniond ee_orientation = Eigen::Quaterniond::Identity();
    int grasp = -1; // grasped cube id, -1 when empty
    std::size_t script_index = 0;
    std::vector<std::uint64_t> emitted;   // channel event ids enqueued this tick
    std::vector<std::uint64_t> delivered; // channel event ids drained this tick
    Eigen::Vector3d force = Eigen::Vector3d::Zero(); // haptic sample rendered this tick
    double torque_z = 0.0;
    bool clamped = false;

    friend bool operator==(const TickRow&, const TickRow&) = default;
};

/// One operator tick.
struct InputRow {
    SimTime t = 0;
    Eigen::Vector3d position_delta = Eigen::Vector3d::Zero();
    Eigen::Quaterniond rotation_delta = Eigen::Quaterniond::Identity();
    double grip_force = 0.0;
    std::uint64_t command_id = 0; // event id of the joint command it produced
    bool ik_ok = true;
    bool waiting = false; // operator paused for feedback

    friend bool operator==(const InputRow&, const InputRow&) = default;
};

/// One emitted visual-channel snapshot.
struct FrameRow {
    std::uint64_t id = 0;
    SimTime emitted = 0;
    std::optional<SimTime> delivered;

    friend bool operator==(const FrameRow&, const FrameRow&) = default;
};

struct EventRow {
    SimTime t = 0;
    std::string kind;
    int object_id = -1;
    double value = 0.0;

    friend bool operator==(const EventRow&, const EventRow&) = default;
};

struct TrialLog {
    Json config; // config_to_json echo
    bool aborted = false;
    std::string abort_reason;
    SimTime duration = 0; // number of simulated ticks (ms)
    bool ticks_recorded = true;
    std::array<std::size_t, 3> high_water{}; // per channel: command, visual, haptic
    std::vector<TickRow> ticks;
    std::vector<InputRow> inputs;
    std::vector<FrameRow> frames;
    std::vector<EventRow> events;
    std::vector<PupilSample> pupil;
    std::optional<PostTrial> post;
};

/// Names of the files of a log with the given stem ("dir/trial" gives
/// dir/trial.meta.json, dir/trial.ticks.csv, ...).
struct LogPaths {
    std::filesystem::path meta, ticks, inputs, frames, events, pupil, post;
    explicit LogPaths(const std::filesystem::path& stem);
};

/// Accepts a stem or the path of any of its files.
std::filesystem::path log_stem(const std::filesystem::path& path);

/// Serialized file contents, keyed like LogPaths.
struct LogText {
    std::string meta, ticks, inputs, frames, events, pupil, post;
    friend bool operator==(const LogText&, const LogText&) = default;
};

LogText serialize_log(const TrialLog& log);
TrialLog parse_log(const LogText& text, const std::string& origin = "log");

/// Throws IoError with the failing path.
void write_log(const TrialLog& log, const std::filesystem::path& stem);
/// Throws FormatVersionError for unknown versions and ParseError naming the
/// file and line of a corrupted row.
TrialLog read_log(const std::filesystem::path& path);

/// First differing line per file, empty when the logs serialize identically.
std::vector<std::string> diff_logs(const TrialLog& a, const TrialLog& b);

/// Shortest decimal that round-trips; empty for NaN.
std::string format_double(double v);

} // namespace telesim
