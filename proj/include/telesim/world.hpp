#pragma once

#include "telesim/kinematics.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace telesim {

enum class ObjectTag { grey, green, blue, purple, obstacle, target };

std::string_view to_string(ObjectTag tag);
ObjectTag object_tag_from_string(std::string_view s);
bool is_cube(ObjectTag tag);

struct SceneObject {
    int id = 0;
    ObjectTag tag = ObjectTag::obstacle;
    Pose pose;
    Eigen::Vector3d half_extents = Eigen::Vector3d::Constant(0.025);
    double mass = 0.0;
    double surface_roughness = 0.0;
    bool grasped = false;
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

struct TaskStep {
    int cube_id = 0;
    int target_id = 0;
    std::vector<int> obstacle_ids;
};

/// Ordered cube sequence; the default order is grey, green, blue, purple.
struct TaskScript {
    std::vector<TaskStep> steps;
};

struct WorldParams {
    double gravity = 9.81;
    double grasp_force_threshold = 2.0; // N
    double grasp_radius = 0.03;         // m from a cube face
    double collider_margin = 0.02;      // m added to target half-extents
    double floor_friction = 0.6;
    double floor_roughness = 0.4;
    double command_period = 1.0 / 90.0; // s, interpolation horizon for joint commands
    double max_joint_speed = 2.5;       // rad/s
    double acceleration_filter = 0.02;  // s, time constant of the effector acceleration estimate
};

enum class WorldEventKind { grasp, grasp_rejected, release, placement, drop_rejected, clamped_input };

std::string_view to_string(WorldEventKind kind);

struct WorldEvent {
    WorldEventKind kind = WorldEventKind::grasp;
    int object_id = -1;
    double value = 0.0; // placement accuracy for placements, 0 otherwise
};

struct Contact {
    int a = -1; // object id; -1 is the floor
    int b = -1;
    double penetration = 0.0;
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ(); // pushes b away from a
    double normal_speed = 0.0;                         // approach speed at detection
    Eigen::Vector3d tangential_velocity = Eigen::Vector3d::Zero();
    double sliding_distance = 0.0;
    double roughness = 0.0;
    bool is_new = false;
};

enum class PulseKind { momentum, impact };

/// Constant force pulse of `duration` seconds; integrates to mass * |dv|.
struct ImpulsePulse {
    PulseKind kind = PulseKind::impact;
    Eigen::Vector3d force = Eigen::Vector3d::Zero();
    double start = 0.0;
    double duration = 0.02;
};

struct WorldState {
    double time = 0.0;
    std::vector<SceneObject> objects;
    JointState robot_joints;
    JointVector joint_target = JointVector::Zero();
    JointVector joint_velocity = JointVector::Zero();
    Pose end_effector;
    Eigen::Vector3d effector_velocity = Eigen::Vector3d::Zero();
    Eigen::Vector3d effector_acceleration = Eigen::Vector3d::Zero();
    double effector_yaw_rate = 0.0;
    std::optional<int> grasp_binding;
    Pose grasp_offset; // cube pose in the effector frame while grasped
    std::vector<Contact> contacts;
    std::vector<ImpulsePulse> pulses;
    std::size_t script_index = 0;
    bool grip_closed = false;
    std::vector<WorldEvent> events; // produced by the most recent step

    const SceneObject* find(int id) const;
    SceneObject* find(int id);
    bool task_complete(const TaskScript& script) const { return script_index >= script.steps.size(); }
};

struct Scene {
    int version = 1;
    std::string name = "default";
    std::vector<SceneObject> objects;
    TaskScript script;
    double transit_height = 0.25;
};

/// Default pick-and-place layout: four cubes, four target zones, obstacles
/// along the carry paths.
Scene default_scene();
void validate_scene(const Scene& scene);

/// Immutable context of a world: arm, task script, parameters.
struct WorldContext {
    ArmModel arm = ArmModel::panda();
    TaskScript script;
    WorldParams params;
};

WorldState make_world(const WorldContext& ctx, const Scene& scene, const JointVector& initial_joints);

/// Advances the world by dt (0 < dt <= 10 ms). `command` is the latest joint
/// command delivered to the robot. Degenerate inputs are clamped and reported
/// as `clamped_input` events.
WorldState step_world(const WorldContext& ctx, const WorldState& state, const JointState& command,
                      double grip_force, double dt);

/// Planar distance between the released cube and its target center.
double placement_accuracy(const Eigen::Vector3d& cube_final, const Eigen::Vector3d& target_center);

/// t_drop - t_grab in seconds; throws InvalidIntervalError when t_drop < t_grab.
double time_on_task(double t_grab, double t_drop);

/// True iff the cube center lies in the closed box around the target
/// (half-extents = target half-extents + margin).
bool placement_gate(const SceneObject& cube, const SceneObject& target, double margin);

} // namespace telesim
