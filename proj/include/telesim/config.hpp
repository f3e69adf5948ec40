#pragma once

#include "telesim/condition.hpp"
#include "telesim/haptics.hpp"
#include "telesim/kinematics.hpp"
#include "telesim/operator.hpp"
#include "telesim/world.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

namespace telesim {

using Json = nlohmann::json;

inline constexpr const char* kSceneDirEnv = "TELESIM_SCENE_DIR";
inline constexpr int kSimRateHz = 1000;

enum class OperatorMode { scripted, live };

/// Post-trial questionnaire. Missing entries stay empty.
struct PostTrial {
    std::optional<double> perceived_visual;
    std::optional<double> perceived_haptic;
    std::optional<double> perceived_gap;
    std::optional<double> tlx_total;
    std::optional<double> tlx_confidence;
    std::optional<double> tlx_frustration;

    bool has_perception() const { return perceived_visual && perceived_haptic && perceived_gap; }
    friend bool operator==(const PostTrial&, const PostTrial&) = default;
};

struct TrialConfig {
    ConditionSpec condition = make_condition(ConditionKind::control, 0);
    std::string scene_file;         // as written in the config; empty = built-in default
    Scene scene = default_scene();  // resolved
    Json arm;                       // null = default Panda table
    OperatorMode mode = OperatorMode::scripted;
    OperatorPolicy policy;
    std::uint64_t seed = 1;
    int visual_rate_hz = 90;
    double duration_cap_s = 180.0;
    bool stop_on_completion = true;
    std::optional<CueStyle> onset_cue;
    SimTime cue_duration = 150; // ms
    bool synthetic_pupil = true;
    WorldParams world;
    HapticParams haptics;
    std::optional<PostTrial> questionnaire; // attached verbatim to scripted trials

    SimTime duration_cap_ms() const;
    ArmModel arm_model() const;
};

Json scene_to_json(const Scene& scene);
Scene scene_from_json(const Json& j);
Scene load_scene(const std::filesystem::path& path);

ArmModel arm_from_json(const Json& j);

Json post_trial_to_json(const PostTrial& p);
PostTrial post_trial_from_json(const Json& j);

/// Full resolved config; the scene is embedded so a log is self-contained.
Json config_to_json(const TrialConfig& config);
/// `base_dir` resolves a relative scene_file before the scene directory from
/// TELESIM_SCENE_DIR. An embedded "scene" object wins over scene_file.
TrialConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
TrialConfig load_config(const std::filesystem::path& path);

/// Locates a scene file: absolute, relative to base_dir, then TELESIM_SCENE_DIR.
std::filesystem::path resolve_scene_path(const std::string& scene_file, const std::filesystem::path& base_dir);

} // namespace telesim
