#include "telesim/config.hpp"
#include "telesim/errors.hpp"
#include "telesim/kinematics.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace telesim;
namespace fs = std::filesystem;

namespace {

fs::path source_dir() {
    const char* d = std::getenv("TELESIM_TEST_DATA");
    REQUIRE(d != nullptr);
    return d;
}

Json minimal(const std::string& kind = "synchronous", int v = 500) {
    return {{"condition", {{"kind", kind}, {"visual_delay_ms", v}}}};
}

Json panda_json() {
    const ArmModel a = ArmModel::panda();
    Json links = Json::array();
    for (const LinkSpec& l : a.links()) {
        links.push_back({{"xyz", {l.origin_xyz.x(), l.origin_xyz.y(), l.origin_xyz.z()}},
                         {"rpy", {l.origin_rpy.x(), l.origin_rpy.y(), l.origin_rpy.z()}},
                         {"axis", {l.axis.x(), l.axis.y(), l.axis.z()}},
                         {"limit", {l.limit.lower, l.limit.upper}}});
    }
    Json tcp = Json::array();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) tcp.push_back(a.flange_to_tcp().linear()(r, c));
        tcp.push_back(a.flange_to_tcp().translation()[r]);
    }
    return {{"links", links}, {"tcp", tcp}, {"max_aperture", a.max_aperture()}};
}

struct ScopedEnv {
    std::string name;
    std::optional<std::string> old;
    ScopedEnv(std::string n, const std::string& value) : name(std::move(n)) {
        if (const char* v = std::getenv(name.c_str())) old = v;
        ::setenv(name.c_str(), value.c_str(), 1);
    }
    ~ScopedEnv() {
        if (old) ::setenv(name.c_str(), old->c_str(), 1);
        else ::unsetenv(name.c_str());
    }
};

} // namespace

TEST_CASE("defaults fill a minimal config") {
    const TrialConfig c = config_from_json(minimal());
    CHECK(c.condition == make_condition(ConditionKind::synchronous, 500));
    CHECK(c.mode == OperatorMode::scripted);
    CHECK(c.seed == 1);
    CHECK(c.visual_rate_hz == 90);
    CHECK(c.scene.objects.size() == default_scene().objects.size());
}

TEST_CASE("config survives a JSON round trip") {
    Json j = minimal("anchoring", 750);
    j["condition"]["onset_delay_ms"] = 40;
    j["seed"] = 77;
    j["onset_cue"] = {{"style", "simulated_force"}, {"duration_ms", 90}};
    j["operator"] = {{"policy", "move_and_wait"}, {"aim_noise_m", 0.001}, {"confirmation_channel", "either"}};
    j["questionnaire"] = {{"perceived_visual_ms", 600}, {"tlx_total", 55}};
    j["arm"] = panda_json();
    const TrialConfig c = config_from_json(j);
    const Json once = config_to_json(c);
    const TrialConfig again = config_from_json(once);
    CHECK(config_to_json(again) == once);
    CHECK(again.condition.onset_delay == 40);
    CHECK(again.onset_cue == CueStyle::simulated_force);
    CHECK(again.cue_duration == 90);
    CHECK(again.policy.variant == PolicyVariant::move_and_wait);
    CHECK(again.policy.aim_noise == 0.001);
    CHECK(again.policy.seed == 77);
    REQUIRE(again.questionnaire);
    CHECK(again.questionnaire->perceived_visual == 600.0);
    CHECK_FALSE(again.questionnaire->perceived_haptic);
}

TEST_CASE("unknown keys and bad values are rejected") {
    Json j = minimal();
    j["sede"] = 3;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = minimal();
    j["operator"] = {{"speed", 1.0}};
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = minimal();
    j["rates"] = {{"sim_hz", 500}};
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = minimal();
    j["rates"] = {{"visual_hz", 0}};
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = minimal();
    j["seed"] = "one";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    CHECK_THROWS_AS(config_from_json(minimal("asynchronous", 250)), ConfigError);
    CHECK_THROWS_AS(config_from_json(minimal("delayed", 250)), ConfigError);
    CHECK_THROWS_AS(config_from_json(Json{{"seed", 1}}), ConfigError);
    j = minimal();
    j["onset_cue"] = {{"style", "vibration"}};
    CHECK_THROWS_AS(config_from_json(j), ConfigError); // synchronous has no onset cue
    j = minimal();
    j["operator"] = {{"mode", "remote"}};
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = minimal();
    j["duration_cap_s"] = -1.0;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("the shipped default scene matches the built-in one") {
    const Scene s = load_scene(source_dir() / "scenes" / "default.json");
    CHECK(scene_to_json(s) == scene_to_json(default_scene()));
}

TEST_CASE("shipped configs load") {
    for (const auto& e : fs::directory_iterator(source_dir() / "configs")) {
        CAPTURE(e.path().string());
        CHECK_NOTHROW(load_config(e.path()));
    }
}

TEST_CASE("scene files resolve against the config directory, then the scene directory") {
    const fs::path root = fs::temp_directory_path() / "telesim_test_scene_dir";
    fs::remove_all(root);
    fs::create_directories(root / "scenes");
    fs::create_directories(root / "cfg");
    Scene s = default_scene();
    s.objects[0].mass = 0.75;
    std::ofstream(root / "scenes" / "heavy.json") << scene_to_json(s).dump(2);

    Json j = minimal();
    j["scene_file"] = "heavy.json";
    CHECK_THROWS_AS(config_from_json(j, root / "cfg"), IoError);
    {
        ScopedEnv env("TELESIM_SCENE_DIR", (root / "scenes").string());
        CHECK(resolve_scene_path("heavy.json", root / "cfg") == root / "scenes" / "heavy.json");
        CHECK(config_from_json(j, root / "cfg").scene.objects[0].mass == 0.75);
        // a file next to the config wins
        Scene near = default_scene();
        near.objects[0].mass = 0.25;
        std::ofstream(root / "cfg" / "heavy.json") << scene_to_json(near).dump();
        CHECK(config_from_json(j, root / "cfg").scene.objects[0].mass == 0.25);
    }
    CHECK_THROWS_AS(resolve_scene_path((root / "missing.json").string(), {}), IoError);

    // an embedded scene wins over scene_file
    j["scene"] = scene_to_json(s);
    j["scene_file"] = "nowhere.json";
    CHECK(config_from_json(j).scene.objects[0].mass == 0.75);

    std::ofstream(root / "scenes" / "broken.json") << "{\"objects\": [";
    CHECK_THROWS_AS(load_scene(root / "scenes" / "broken.json"), ConfigError);
    fs::remove_all(root);
}

TEST_CASE("arm tables load from JSON") {
    const ArmModel a = arm_from_json(panda_json());
    const ArmModel ref = ArmModel::panda();
    JointState q;
    q.angles = ready_configuration();
    const Pose pa = forward_kinematics(a, q), pr = forward_kinematics(ref, q);
    CHECK((pa.position - pr.position).norm() < 1e-12);
    CHECK(angular_distance(pa.orientation, pr.orientation) < 1e-9);

    Json bad = panda_json();
    bad["links"].erase(0);
    CHECK_THROWS_AS(arm_from_json(bad), ConfigError);
    bad = panda_json();
    bad["tcp"] = {1, 0, 0};
    CHECK_THROWS_AS(arm_from_json(bad), ConfigError);
    bad = panda_json();
    bad["links"][0]["limit"] = {1.0};
    CHECK_THROWS_AS(arm_from_json(bad), ConfigError);
    bad = panda_json();
    bad["base_orientation"] = {2, 0, 0, 0};
    CHECK_THROWS_AS(arm_from_json(bad), ConfigError);
    bad = panda_json();
    bad["elbow"] = 1;
    CHECK_THROWS_AS(arm_from_json(bad), ConfigError);
}

TEST_CASE("questionnaire parsing") {
    const PostTrial p = post_trial_from_json({{"perceived_visual_ms", 300}, {"tlx_frustration", 20}});
    CHECK(p.perceived_visual == 300.0);
    CHECK(p.tlx_frustration == 20.0);
    CHECK_FALSE(p.has_perception());
    CHECK(post_trial_from_json(post_trial_to_json(p)) == p);
    CHECK_THROWS_AS(post_trial_from_json({{"perceived_gap_ms", -5}}), ConfigError);
    CHECK_THROWS_AS(post_trial_from_json({{"mood", 5}}), ConfigError);
    CHECK_THROWS_AS(post_trial_from_json({{"tlx_total", "high"}}), ConfigError);
}
