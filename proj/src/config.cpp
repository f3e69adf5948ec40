#include "telesim/config.hpp"

#include "telesim/errors.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace telesim {

namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
        if (!known) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get(const Json& j, const char* key, const T& fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

Eigen::Vector3d vec3(const Json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json vec3_json(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Eigen::Quaterniond quat(const Json& j) {
    if (!j.is_array() || j.size() != 4) throw ConfigError("orientation must be [w, x, y, z]");
    Eigen::Quaterniond q(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
    if (std::abs(q.norm() - 1.0) > 1e-9) throw ConfigError("orientation quaternion is not unit length");
    return q;
}

Json quat_json(const Eigen::Quaterniond& q) { return Json::array({q.w(), q.x(), q.y(), q.z()}); }

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_value(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

} // namespace

SimTime TrialConfig::duration_cap_ms() const { return static_cast<SimTime>(std::llround(duration_cap_s * 1000.0)); }

ArmModel TrialConfig::arm_model() const { return arm.is_null() ? ArmModel::panda() : arm_from_json(arm); }

// ---- scene ----------------------------------------------------------------------

Json scene_to_json(const Scene& scene) {
    Json objects = Json::array();
    for (const SceneObject& o : scene.objects) {
        objects.push_back({{"id", o.id},
                           {"tag", std::string(to_string(o.tag))},
                           {"position", vec3_json(o.pose.position)},
                           {"orientation", quat_json(o.pose.orientation)},
                           {"half_extents", vec3_json(o.half_extents)},
                           {"mass", o.mass},
                           {"roughness", o.surface_roughness}});
    }
    Json script = Json::array();
    for (const TaskStep& s : scene.script.steps) {
        script.push_back({{"cube", s.cube_id}, {"target", s.target_id}, {"obstacles", s.obstacle_ids}});
    }
    return {{"version", scene.version},
            {"name", scene.name},
            {"transit_height", scene.transit_height},
            {"objects", objects},
            {"script", script}};
}

Scene scene_from_json(const Json& j) {
    check_keys(j, {"version", "name", "transit_height", "objects", "script"}, "scene");
    Scene scene;
    scene.version = get<int>(j, "version", 1);
    if (scene.version != 1) throw FormatVersionError("unsupported scene version " + std::to_string(scene.version));
    scene.name = get<std::string>(j, "name", "unnamed");
    scene.transit_height = get<double>(j, "transit_height", scene.transit_height);
    scene.objects.clear();
    scene.script.steps.clear();
    try {
        for (const Json& o : j.at("objects")) {
            check_keys(o, {"id", "tag", "position", "orientation", "half_extents", "mass", "roughness"}, "scene object");
            SceneObject obj;
            obj.id = o.at("id").get<int>();
            obj.tag = object_tag_from_string(o.at("tag").get<std::string>());
            obj.pose.position = vec3(o.at("position"), "position");
            if (o.contains("orientation")) obj.pose.orientation = quat(o.at("orientation"));
            obj.half_extents = vec3(o.at("half_extents"), "half_extents");
            obj.mass = get<double>(o, "mass", 0.0);
            obj.surface_roughness = get<double>(o, "roughness", 0.0);
            scene.objects.push_back(obj);
        }
        for (const Json& s : j.at("script")) {
            check_keys(s, {"cube", "target", "obstacles"}, "script step");
            TaskStep step;
            step.cube_id = s.at("cube").get<int>();
            step.target_id = s.at("target").get<int>();
            step.obstacle_ids = get<std::vector<int>>(s, "obstacles", {});
            scene.script.steps.push_back(step);
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed scene: ") + e.what());
    }
    validate_scene(scene);
    return scene;
}

namespace {

Json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace

Scene load_scene(const fs::path& path) { return scene_from_json(read_json_file(path)); }

fs::path resolve_scene_path(const std::string& scene_file, const fs::path& base_dir) {
    const fs::path p(scene_file);
    if (p.is_absolute()) {
        if (fs::exists(p)) return p;
        throw IoError(p.string(), "scene file not found");
    }
    if (!base_dir.empty() && fs::exists(base_dir / p)) return base_dir / p;
    if (const char* dir = std::getenv(kSceneDirEnv); dir && *dir) {
        if (fs::exists(fs::path(dir) / p)) return fs::path(dir) / p;
    }
    if (fs::exists(p)) return p;
    throw IoError(scene_file, std::string("scene file not found (searched config directory and $") + kSceneDirEnv + ")");
}

// ---- arm -------------------------------------------------------------------------

ArmModel arm_from_json(const Json& j) {
    check_keys(j, {"links", "tcp", "base_position", "base_orientation", "max_aperture"}, "arm");
    try {
        const Json& links = j.at("links");
        if (!links.is_array() || links.size() != kNumJoints) throw ConfigError("arm needs exactly 7 links");
        std::array<LinkSpec, kNumJoints> specs;
        for (std::size_t i = 0; i < specs.size(); ++i) {
            const Json& l = links[i];
            check_keys(l, {"xyz", "rpy", "axis", "limit"}, "arm link");
            specs[i].origin_xyz = vec3(l.at("xyz"), "xyz");
            specs[i].origin_rpy = vec3(get<Json>(l, "rpy", Json::array({0.0, 0.0, 0.0})), "rpy");
            specs[i].axis = vec3(get<Json>(l, "axis", Json::array({0.0, 0.0, 1.0})), "axis");
            const auto lim = l.at("limit").get<std::vector<double>>();
            if (lim.size() != 2) throw ConfigError("joint limit must be [lower, upper]");
            specs[i].limit = {lim[0], lim[1]};
        }
        const auto m = j.at("tcp").get<std::vector<double>>();
        if (m.size() != 12) throw ConfigError("tcp must be a 3x4 row-major matrix");
        Eigen::Isometry3d tcp = Eigen::Isometry3d::Identity();
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) tcp.linear()(r, c) = m[static_cast<std::size_t>(4 * r + c)];
            tcp.translation()[r] = m[static_cast<std::size_t>(4 * r + 3)];
        }
        Pose base;
        if (j.contains("base_position")) base.position = vec3(j.at("base_position"), "base_position");
        if (j.contains("base_orientation")) base.orientation = quat(j.at("base_orientation"));
        return ArmModel(specs, tcp, base, get<double>(j, "max_aperture", 0.08));
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed arm: ") + e.what());
    }
}

// ---- questionnaire ---------------------------------------------------------------

Json post_trial_to_json(const PostTrial& p) {
    return {{"perceived_visual_ms", optional_json(p.perceived_visual)},
            {"perceived_haptic_ms", optional_json(p.perceived_haptic)},
            {"perceived_gap_ms", optional_json(p.perceived_gap)},
            {"tlx_total", optional_json(p.tlx_total)},
            {"tlx_confidence", optional_json(p.tlx_confidence)},
            {"tlx_frustration", optional_json(p.tlx_frustration)}};
}

PostTrial post_trial_from_json(const Json& j) {
    check_keys(j,
               {"perceived_visual_ms", "perceived_haptic_ms", "perceived_gap_ms", "tlx_total", "tlx_confidence",
                "tlx_frustration"},
               "questionnaire");
    PostTrial p;
    try {
        p.perceived_visual = optional_value(j, "perceived_visual_ms");
        p.perceived_haptic = optional_value(j, "perceived_haptic_ms");
        p.perceived_gap = optional_value(j, "perceived_gap_ms");
        p.tlx_total = optional_value(j, "tlx_total");
        p.tlx_confidence = optional_value(j, "tlx_confidence");
        p.tlx_frustration = optional_value(j, "tlx_frustration");
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed questionnaire: ") + e.what());
    }
    for (const auto* v : {&p.perceived_visual, &p.perceived_haptic, &p.perceived_gap}) {
        if (*v && **v < 0.0) throw ConfigError("perceived delays must be >= 0");
    }
    return p;
}

// ---- trial config ------------------------------------------------------------------

Json config_to_json(const TrialConfig& c) {
    const OperatorPolicy& p = c.policy;
    Json j;
    j["condition"] = {{"kind", std::string(to_string(c.condition.kind))},
                      {"visual_delay_ms", c.condition.visual_delay},
                      {"onset_delay_ms", c.condition.onset_delay}};
    j["scene_file"] = c.scene_file;
    j["scene"] = scene_to_json(c.scene);
    j["arm"] = c.arm;
    j["operator"] = {{"mode", c.mode == OperatorMode::scripted ? "scripted" : "live"},
                     {"policy", std::string(to_string(p.variant))},
                     {"reaction_time_ms", p.reaction_time},
                     {"reaction_jitter_ms", p.reaction_jitter},
                     {"speed_limit", p.speed_limit},
                     {"acceleration", p.acceleration},
                     {"pursuit_gain", p.pursuit_gain},
                     {"segment_length", p.segment_length},
                     {"grip_force", p.grip_force},
                     {"aim_noise_m", p.aim_noise},
                     {"confirmation_channel", std::string(to_string(p.confirmation_channel))}};
    j["seed"] = c.seed;
    j["rates"] = {{"sim_hz", kSimRateHz}, {"visual_hz", c.visual_rate_hz}};
    j["duration_cap_s"] = c.duration_cap_s;
    j["stop_on_completion"] = c.stop_on_completion;
    j["onset_cue"] = c.onset_cue ? Json{{"style", std::string(to_string(*c.onset_cue))}, {"duration_ms", c.cue_duration}}
                                 : Json(nullptr);
    j["pupil"] = {{"synthetic", c.synthetic_pupil}};
    const WorldParams& w = c.world;
    j["world"] = {{"gravity", w.gravity},
                  {"grasp_force_threshold", w.grasp_force_threshold},
                  {"grasp_radius", w.grasp_radius},
                  {"collider_margin", w.collider_margin},
                  {"floor_friction", w.floor_friction},
                  {"floor_roughness", w.floor_roughness},
                  {"max_joint_speed", w.max_joint_speed}};
    const HapticParams& h = c.haptics;
    j["haptics"] = {{"max_force", h.max_force},
                    {"texture_amplitude", h.texture_amplitude},
                    {"texture_frequency", h.texture_frequency},
                    {"balance_length", h.balance_length},
                    {"rotation_damping", h.rotation_damping},
                    {"vibration_amplitude", h.vibration_amplitude},
                    {"vibration_frequency", h.vibration_frequency}};
    j["questionnaire"] = c.questionnaire ? post_trial_to_json(*c.questionnaire) : Json(nullptr);
    return j;
}

TrialConfig config_from_json(const Json& j, const fs::path& base_dir) {
    check_keys(j,
               {"condition", "scene_file", "scene", "arm", "operator", "seed", "rates", "duration_cap_s",
                "stop_on_completion", "onset_cue", "pupil", "world", "haptics", "questionnaire"},
               "trial config");
    TrialConfig c;
    try {
        const Json& cond = j.at("condition");
        check_keys(cond, {"kind", "visual_delay_ms", "onset_delay_ms"}, "condition");
        c.condition = make_condition(condition_kind_from_string(cond.at("kind").get<std::string>()),
                                     get<SimTime>(cond, "visual_delay_ms", 0), get<SimTime>(cond, "onset_delay_ms", 0));
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed condition: ") + e.what());
    }

    c.scene_file = get<std::string>(j, "scene_file", "");
    if (j.contains("scene") && !j.at("scene").is_null()) {
        c.scene = scene_from_json(j.at("scene"));
    } else if (!c.scene_file.empty()) {
        c.scene = load_scene(resolve_scene_path(c.scene_file, base_dir));
    }

    if (j.contains("arm") && !j.at("arm").is_null()) {
        c.arm = j.at("arm");
        (void)arm_from_json(c.arm); // validate now
    }

    c.seed = get<std::uint64_t>(j, "seed", 1);
    if (j.contains("operator")) {
        const Json& o = j.at("operator");
        check_keys(o,
                   {"mode", "policy", "reaction_time_ms", "reaction_jitter_ms", "speed_limit", "acceleration",
                    "pursuit_gain", "segment_length", "grip_force", "aim_noise_m", "confirmation_channel"},
                   "operator");
        const std::string mode = get<std::string>(o, "mode", "scripted");
        if (mode == "scripted") {
            c.mode = OperatorMode::scripted;
        } else if (mode == "live") {
            c.mode = OperatorMode::live;
        } else {
            throw ConfigError("operator mode must be 'scripted' or 'live'");
        }
        OperatorPolicy& p = c.policy;
        p.variant = policy_variant_from_string(get<std::string>(o, "policy", std::string(to_string(p.variant))));
        p.reaction_time = get<SimTime>(o, "reaction_time_ms", p.reaction_time);
        p.reaction_jitter = get<SimTime>(o, "reaction_jitter_ms", p.reaction_jitter);
        p.speed_limit = get<double>(o, "speed_limit", p.speed_limit);
        p.acceleration = get<double>(o, "acceleration", p.acceleration);
        p.pursuit_gain = get<double>(o, "pursuit_gain", p.pursuit_gain);
        p.segment_length = get<double>(o, "segment_length", p.segment_length);
        p.grip_force = get<double>(o, "grip_force", p.grip_force);
        p.aim_noise = get<double>(o, "aim_noise_m", p.aim_noise);
        p.confirmation_channel = confirmation_channel_from_string(
            get<std::string>(o, "confirmation_channel", std::string(to_string(p.confirmation_channel))));
    }
    c.policy.seed = c.seed;
    c.policy.validate();

    if (j.contains("rates")) {
        const Json& r = j.at("rates");
        check_keys(r, {"sim_hz", "visual_hz"}, "rates");
        if (get<int>(r, "sim_hz", kSimRateHz) != kSimRateHz) {
            throw ConfigError("the simulation clock runs at 1000 Hz (integer milliseconds)");
        }
        c.visual_rate_hz = get<int>(r, "visual_hz", c.visual_rate_hz);
        if (c.visual_rate_hz < 1 || c.visual_rate_hz > kSimRateHz) throw ConfigError("visual_hz must be in [1, 1000]");
    }
    c.duration_cap_s = get<double>(j, "duration_cap_s", c.duration_cap_s);
    if (!(c.duration_cap_s >= 0.0) || c.duration_cap_s > 24 * 3600.0) throw ConfigError("duration_cap_s out of range");
    c.stop_on_completion = get<bool>(j, "stop_on_completion", c.stop_on_completion);

    if (j.contains("onset_cue") && !j.at("onset_cue").is_null()) {
        const Json& cue = j.at("onset_cue");
        check_keys(cue, {"style", "duration_ms"}, "onset_cue");
        c.onset_cue = cue_style_from_string(get<std::string>(cue, "style", "vibration"));
        c.cue_duration = get<SimTime>(cue, "duration_ms", c.cue_duration);
        (void)haptic_onset_cue(c.condition, *c.onset_cue, std::nullopt); // anchoring only
    }
    if (j.contains("pupil")) {
        check_keys(j.at("pupil"), {"synthetic"}, "pupil");
        c.synthetic_pupil = get<bool>(j.at("pupil"), "synthetic", c.synthetic_pupil);
    }
    if (j.contains("world")) {
        const Json& w = j.at("world");
        check_keys(w,
                   {"gravity", "grasp_force_threshold", "grasp_radius", "collider_margin", "floor_friction",
                    "floor_roughness", "max_joint_speed"},
                   "world");
        WorldParams& p = c.world;
        p.gravity = get<double>(w, "gravity", p.gravity);
        p.grasp_force_threshold = get<double>(w, "grasp_force_threshold", p.grasp_force_threshold);
        p.grasp_radius = get<double>(w, "grasp_radius", p.grasp_radius);
        p.collider_margin = get<double>(w, "collider_margin", p.collider_margin);
        p.floor_friction = get<double>(w, "floor_friction", p.floor_friction);
        p.floor_roughness = get<double>(w, "floor_roughness", p.floor_roughness);
        p.max_joint_speed = get<double>(w, "max_joint_speed", p.max_joint_speed);
    }
    c.world.command_period = 1.0 / c.visual_rate_hz;
    if (j.contains("haptics")) {
        const Json& h = j.at("haptics");
        check_keys(h,
                   {"max_force", "texture_amplitude", "texture_frequency", "balance_length", "rotation_damping",
                    "vibration_amplitude", "vibration_frequency"},
                   "haptics");
        HapticParams& p = c.haptics;
        p.max_force = get<double>(h, "max_force", p.max_force);
        p.texture_amplitude = get<double>(h, "texture_amplitude", p.texture_amplitude);
        p.texture_frequency = get<double>(h, "texture_frequency", p.texture_frequency);
        p.balance_length = get<double>(h, "balance_length", p.balance_length);
        p.rotation_damping = get<double>(h, "rotation_damping", p.rotation_damping);
        p.vibration_amplitude = get<double>(h, "vibration_amplitude", p.vibration_amplitude);
        p.vibration_frequency = get<double>(h, "vibration_frequency", p.vibration_frequency);
    }
    c.haptics.gravity = c.world.gravity;
    if (j.contains("questionnaire") && !j.at("questionnaire").is_null()) {
        c.questionnaire = post_trial_from_json(j.at("questionnaire"));
    }
    return c;
}

TrialConfig load_config(const fs::path& path) {
    return config_from_json(read_json_file(path), path.parent_path());
}

} // namespace telesim
