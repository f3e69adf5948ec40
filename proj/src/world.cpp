#include "telesim/world.hpp"

#include "telesim/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <utility>

namespace telesim {

namespace {

constexpr int kFloorId = -1;
constexpr int kResolvePasses = 4;

struct Box {
    Eigen::Vector3d center;
    Eigen::Vector3d half;
};

Box box_of(const SceneObject& o) { return {o.pose.position, o.half_extents}; }

// Penetration of b into a along the axis of least overlap; normal points from a to b.
std::optional<std::pair<double, Eigen::Vector3d>> overlap(const Box& a, const Box& b,
                                                          double tolerance = 0.0) {
    const Eigen::Vector3d d = b.center - a.center;
    const Eigen::Vector3d pen = (a.half + b.half) - d.cwiseAbs();
    if ((pen.array() < -tolerance).any()) {
        return std::nullopt;
    }
    int axis = 0;
    pen.minCoeff(&axis);
    Eigen::Vector3d n = Eigen::Vector3d::Zero();
    n[axis] = d[axis] >= 0.0 ? 1.0 : -1.0;
    return std::make_pair(pen[axis], n);
}

double distance_to_box(const Eigen::Vector3d& p, const SceneObject& o) {
    const Eigen::Vector3d d = ((p - o.pose.position).cwiseAbs() - o.half_extents).cwiseMax(0.0);
    return d.norm();
}

std::pair<int, int> contact_key(int a, int b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); }

} // namespace

std::string_view to_string(ObjectTag tag) {
    switch (tag) {
    case ObjectTag::grey: return "grey";
    case ObjectTag::green: return "green";
    case ObjectTag::blue: return "blue";
    case ObjectTag::purple: return "purple";
    case ObjectTag::obstacle: return "obstacle";
    case ObjectTag::target: return "target";
    }
    return "obstacle";
}

ObjectTag object_tag_from_string(std::string_view s) {
    for (ObjectTag t : {ObjectTag::grey, ObjectTag::green, ObjectTag::blue, ObjectTag::purple,
                        ObjectTag::obstacle, ObjectTag::target}) {
        if (to_string(t) == s) return t;
    }
    throw ConfigError("unknown object tag '" + std::string(s) + "'");
}

bool is_cube(ObjectTag tag) {
    return tag == ObjectTag::grey || tag == ObjectTag::green || tag == ObjectTag::blue ||
           tag == ObjectTag::purple;
}

std::string_view to_string(WorldEventKind kind) {
    switch (kind) {
    case WorldEventKind::grasp: return "grasp";
    case WorldEventKind::grasp_rejected: return "grasp_rejected";
    case WorldEventKind::release: return "release";
    case WorldEventKind::placement: return "placement";
    case WorldEventKind::drop_rejected: return "drop_rejected";
    case WorldEventKind::clamped_input: return "clamped_input";
    }
    return "grasp";
}

const SceneObject* WorldState::find(int id) const {
    for (const auto& o : objects) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

SceneObject* WorldState::find(int id) {
    for (auto& o : objects) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

Scene default_scene() {
    Scene scene;
    scene.name = "default";
    scene.version = 1;
    auto cube = [](int id, ObjectTag tag, double x, double y, double mass, double roughness) {
        SceneObject o;
        o.id = id;
        o.tag = tag;
        o.pose.position = {x, y, 0.025};
        o.half_extents = Eigen::Vector3d::Constant(0.025);
        o.mass = mass;
        o.surface_roughness = roughness;
        return o;
    };
    auto zone = [](int id, ObjectTag tag, double x, double y, Eigen::Vector3d half) {
        SceneObject o;
        o.id = id;
        o.tag = tag;
        o.pose.position = {x, y, half.z()};
        o.half_extents = half;
        o.surface_roughness = 0.3;
        return o;
    };
    const Eigen::Vector3d target_half = Eigen::Vector3d::Constant(0.035);
    scene.objects = {
        cube(1, ObjectTag::grey, 0.40, -0.20, 0.3, 0.2),
        cube(2, ObjectTag::green, 0.55, -0.25, 0.4, 0.3),
        cube(3, ObjectTag::blue, 0.35, -0.32, 0.5, 0.4),
        cube(4, ObjectTag::purple, 0.62, -0.10, 0.6, 0.5),
        zone(11, ObjectTag::target, 0.40, 0.15, target_half),
        zone(12, ObjectTag::target, 0.60, 0.20, target_half),
        zone(13, ObjectTag::target, 0.62, 0.30, target_half),
        zone(14, ObjectTag::target, 0.33, 0.32, target_half),
        zone(21, ObjectTag::obstacle, 0.40, -0.02, {0.04, 0.03, 0.06}),
        zone(22, ObjectTag::obstacle, 0.58, 0.00, {0.03, 0.05, 0.08}),
        zone(23, ObjectTag::obstacle, 0.48, 0.08, {0.05, 0.02, 0.09}),
    };
    scene.script.steps = {
        {1, 11, {21}},
        {2, 12, {22}},
        {3, 13, {21, 23}},
        {4, 14, {22, 23}},
    };
    scene.transit_height = 0.25;
    return scene;
}

void validate_scene(const Scene& scene) {
    int cubes = 0;
    int targets = 0;
    std::map<int, const SceneObject*> by_id;
    for (const auto& o : scene.objects) {
        if (!by_id.emplace(o.id, &o).second) {
            throw ConfigError("duplicate object id " + std::to_string(o.id));
        }
        if ((o.half_extents.array() <= 0.0).any()) {
            throw ConfigError("object " + std::to_string(o.id) + " has non-positive half extents");
        }
        if (o.surface_roughness < 0.0) {
            throw ConfigError("object " + std::to_string(o.id) + " has negative roughness");
        }
        if (is_cube(o.tag)) {
            ++cubes;
            if (!(o.mass > 0.0)) {
                throw ConfigError("cube " + std::to_string(o.id) + " must have positive mass");
            }
        } else if (o.tag == ObjectTag::target) {
            ++targets;
        }
    }
    if (cubes != 4 || targets != 4) {
        throw ConfigError("a standard scene needs exactly four cubes and four targets");
    }
    if (scene.script.steps.empty()) {
        throw ConfigError("task script is empty");
    }
    for (const auto& step : scene.script.steps) {
        auto c = by_id.find(step.cube_id);
        auto t = by_id.find(step.target_id);
        if (c == by_id.end() || !is_cube(c->second->tag)) {
            throw ConfigError("task step references unknown cube " + std::to_string(step.cube_id));
        }
        if (t == by_id.end() || t->second->tag != ObjectTag::target) {
            throw ConfigError("task step references unknown target " + std::to_string(step.target_id));
        }
        for (int ob : step.obstacle_ids) {
            auto it = by_id.find(ob);
            if (it == by_id.end() || it->second->tag != ObjectTag::obstacle) {
                throw ConfigError("task step references unknown obstacle " + std::to_string(ob));
            }
        }
    }
}

WorldState make_world(const WorldContext& ctx, const Scene& scene, const JointVector& initial_joints) {
    WorldState w;
    w.objects = scene.objects;
    w.robot_joints.angles = ctx.arm.clamp(initial_joints);
    w.robot_joints.gripper_aperture = ctx.arm.max_aperture();
    w.joint_target = w.robot_joints.angles;
    w.end_effector = Pose::from_isometry(chain_frames(ctx.arm, w.robot_joints.angles).tcp);
    return w;
}

WorldState step_world(const WorldContext& ctx, const WorldState& state, const JointState& command,
                      double grip_force, double dt) {
    const WorldParams& p = ctx.params;
    WorldState next = state;
    next.events.clear();

    if (!(dt > 0.0 && dt <= 0.01)) {
        dt = std::isfinite(dt) ? std::clamp(dt, 1e-6, 0.01) : 1e-3;
        next.events.push_back({WorldEventKind::clamped_input, -1, dt});
    }
    if (!std::isfinite(grip_force) || grip_force < 0.0) {
        grip_force = 0.0;
        next.events.push_back({WorldEventKind::clamped_input, -1, 0.0});
    }
    JointVector cmd = command.angles;
    if (!cmd.allFinite()) {
        cmd = state.joint_target;
        next.events.push_back({WorldEventKind::clamped_input, -1, 0.0});
    } else if (!ctx.arm.within_limits(cmd)) {
        cmd = ctx.arm.clamp(cmd);
        next.events.push_back({WorldEventKind::clamped_input, -1, 0.0});
    }
    next.time = state.time + dt;

    // Joint interpolation: each new command is reached over one command period.
    JointVector& q = next.robot_joints.angles;
    if (cmd != state.joint_target) {
        next.joint_target = cmd;
        JointVector v = (cmd - q) / p.command_period;
        const double vmax = v.cwiseAbs().maxCoeff();
        if (vmax > p.max_joint_speed) v *= p.max_joint_speed / vmax;
        next.joint_velocity = v;
    }
    for (int i = 0; i < kNumJoints; ++i) {
        const double before = next.joint_target[i] - q[i];
        q[i] += next.joint_velocity[i] * dt;
        const double after = next.joint_target[i] - q[i];
        if (before == 0.0 || (before > 0.0) != (after > 0.0)) {
            q[i] = next.joint_target[i];
            next.joint_velocity[i] = 0.0;
        }
    }
    q = ctx.arm.clamp(q);
    next.robot_joints.timestamp = next.time;

    const Eigen::Isometry3d tcp = chain_frames(ctx.arm, q).tcp;
    next.end_effector = Pose::from_isometry(tcp);
    const Eigen::Vector3d v_ee = (next.end_effector.position - state.end_effector.position) / dt;
    const Eigen::Vector3d a_raw = (v_ee - state.effector_velocity) / dt;
    next.effector_velocity = v_ee;
    next.effector_acceleration =
        state.effector_acceleration + (a_raw - state.effector_acceleration) * (dt / (p.acceleration_filter + dt));
    {
        Eigen::Quaterniond d = next.end_effector.orientation * state.end_effector.orientation.conjugate();
        if (d.w() < 0.0) d.coeffs() = -d.coeffs();
        next.effector_yaw_rate = 2.0 * d.z() / dt;
    }

    const bool closed = grip_force >= p.grasp_force_threshold;
    next.grip_closed = closed;

    // Release.
    if (next.grasp_binding && !closed) {
        SceneObject* cube = next.find(*next.grasp_binding);
        cube->grasped = false;
        cube->velocity = v_ee;
        next.events.push_back({WorldEventKind::release, cube->id, 0.0});
        const auto& steps = ctx.script.steps;
        if (next.script_index < steps.size() && steps[next.script_index].cube_id == cube->id) {
            const SceneObject* target = next.find(steps[next.script_index].target_id);
            if (target && placement_gate(*cube, *target, p.collider_margin)) {
                next.events.push_back({WorldEventKind::placement, cube->id,
                                       placement_accuracy(cube->pose.position, target->pose.position)});
                ++next.script_index;
            } else {
                next.events.push_back({WorldEventKind::drop_rejected, cube->id, 0.0});
            }
        } else {
            next.events.push_back({WorldEventKind::drop_rejected, cube->id, 0.0});
        }
        next.grasp_binding.reset();
    }

    // Grasp: closed gripper within the grasp radius of a cube.
    if (!next.grasp_binding && closed) {
        const SceneObject* candidate = nullptr;
        double best = p.grasp_radius;
        for (const auto& o : next.objects) {
            if (!is_cube(o.tag)) continue;
            const double d = distance_to_box(next.end_effector.position, o);
            if (d <= best) {
                best = d;
                candidate = &o;
            }
        }
        const auto& steps = ctx.script.steps;
        const bool scripted = candidate && next.script_index < steps.size() &&
                              steps[next.script_index].cube_id == candidate->id;
        const bool was_closed = state.grip_closed;
        if (scripted) {
            SceneObject* cube = next.find(candidate->id);
            const Eigen::Vector3d dv = v_ee - cube->velocity;
            if (dv.norm() > 0.0) {
                ImpulsePulse pulse;
                pulse.kind = PulseKind::momentum;
                pulse.force = -cube->mass * dv / pulse.duration;
                pulse.start = next.time;
                next.pulses.push_back(pulse);
            }
            cube->grasped = true;
            cube->velocity = v_ee;
            next.grasp_binding = cube->id;
            next.grasp_offset = Pose::from_isometry(tcp.inverse() * cube->pose.to_isometry());
            next.events.push_back({WorldEventKind::grasp, cube->id, 0.0});
        } else if (candidate && !was_closed) {
            next.events.push_back({WorldEventKind::grasp_rejected, candidate->id, 0.0});
        }
    }
    if (next.grasp_binding) {
        const SceneObject* bound = next.find(*next.grasp_binding);
        next.robot_joints.gripper_aperture =
            std::min(ctx.arm.max_aperture(), 2.0 * bound->half_extents.x());
    } else {
        next.robot_joints.gripper_aperture = closed ? 0.0 : ctx.arm.max_aperture();
    }

    // Kinematic follow of the grasped cube, free-body integration of the rest.
    std::map<int, Eigen::Vector3d> pre_velocity;
    for (auto& o : next.objects) {
        if (!is_cube(o.tag)) continue;
        if (o.grasped) {
            o.pose = Pose::from_isometry(tcp * next.grasp_offset.to_isometry());
            o.velocity = v_ee;
        } else {
            o.velocity.z() -= p.gravity * dt;
            o.pose.position += o.velocity * dt;
        }
        pre_velocity[o.id] = o.velocity;
    }

    for (int pass = 0; pass < kResolvePasses; ++pass) {
        for (auto& o : next.objects) {
            if (!is_cube(o.tag) || o.grasped) continue;
            // floor
            const double floor_pen = o.half_extents.z() - o.pose.position.z();
            if (floor_pen > 0.0) {
                o.pose.position.z() += floor_pen;
                if (o.velocity.z() < 0.0) o.velocity.z() = 0.0;
                if (pass == 0) {
                    Eigen::Vector2d vh(o.velocity.x(), o.velocity.y());
                    const double speed = vh.norm();
                    const double drop = p.floor_friction * p.gravity * dt;
                    if (speed <= drop) {
                        o.velocity.x() = 0.0;
                        o.velocity.y() = 0.0;
                    } else {
                        vh *= (speed - drop) / speed;
                        o.velocity.x() = vh.x();
                        o.velocity.y() = vh.y();
                    }
                }
            }
            // static obstacles and the kinematic grasped cube
            for (const auto& other : next.objects) {
                if (other.id == o.id) continue;
                const bool solid = other.tag == ObjectTag::obstacle || (is_cube(other.tag) && other.grasped);
                if (!solid) continue;
                auto hit = overlap(box_of(other), box_of(o));
                if (!hit || hit->first <= 0.0) continue;
                const auto& [pen, n] = *hit;
                o.pose.position += pen * n;
                const double rel = (o.velocity - other.velocity).dot(n);
                if (rel < 0.0) o.velocity -= rel * n;
            }
        }
        // free cube pairs
        for (std::size_t i = 0; i < next.objects.size(); ++i) {
            auto& a = next.objects[i];
            if (!is_cube(a.tag) || a.grasped) continue;
            for (std::size_t j = i + 1; j < next.objects.size(); ++j) {
                auto& b = next.objects[j];
                if (!is_cube(b.tag) || b.grasped) continue;
                auto hit = overlap(box_of(a), box_of(b));
                if (!hit || hit->first <= 0.0) continue;
                const auto& [pen, n] = *hit;
                const double wa = b.mass / (a.mass + b.mass);
                a.pose.position -= wa * pen * n;
                b.pose.position += (1.0 - wa) * pen * n;
                const double rel = (b.velocity - a.velocity).dot(n);
                if (rel < 0.0) {
                    const double vcm = (a.mass * a.velocity.dot(n) + b.mass * b.velocity.dot(n)) / (a.mass + b.mass);
                    a.velocity += (vcm - a.velocity.dot(n)) * n;
                    b.velocity += (vcm - b.velocity.dot(n)) * n;
                }
            }
        }
    }

    // Contact set with persistence for sliding distance and new-contact detection.
    std::map<std::pair<int, int>, const Contact*> previous;
    for (const auto& c : state.contacts) previous[contact_key(c.a, c.b)] = &c;
    constexpr double touch = 1e-6;
    std::vector<Contact> contacts;
    auto record = [&](int a_id, const Eigen::Vector3d& a_vel, double a_rough, const SceneObject& b,
                      double pen, const Eigen::Vector3d& n) {
        Contact c;
        c.a = a_id;
        c.b = b.id;
        c.penetration = pen;
        c.normal = n;
        const Eigen::Vector3d rel = pre_velocity.count(b.id) ? pre_velocity[b.id] - a_vel : Eigen::Vector3d(-a_vel);
        c.normal_speed = std::max(0.0, -rel.dot(n));
        const Eigen::Vector3d rel_now = b.velocity - a_vel;
        c.tangential_velocity = rel_now - rel_now.dot(n) * n;
        c.roughness = 0.5 * (a_rough + b.surface_roughness);
        auto it = previous.find(contact_key(c.a, c.b));
        c.is_new = it == previous.end();
        c.sliding_distance = (c.is_new ? 0.0 : it->second->sliding_distance) + c.tangential_velocity.norm() * dt;
        contacts.push_back(c);
    };
    for (std::size_t i = 0; i < next.objects.size(); ++i) {
        const auto& b = next.objects[i];
        if (!is_cube(b.tag)) continue;
        const double floor_gap = b.pose.position.z() - b.half_extents.z();
        if (floor_gap <= touch) {
            record(kFloorId, Eigen::Vector3d::Zero(), p.floor_roughness, b, -floor_gap, Eigen::Vector3d::UnitZ());
        }
        for (std::size_t j = 0; j < next.objects.size(); ++j) {
            const auto& a = next.objects[j];
            if (i == j || a.tag == ObjectTag::target) continue;
            if (is_cube(a.tag) && j > i) continue; // cube pairs recorded once
            auto hit = overlap(box_of(a), box_of(b), touch);
            if (!hit) continue;
            const Eigen::Vector3d a_vel = is_cube(a.tag) ? a.velocity : Eigen::Vector3d::Zero();
            record(a.id, a_vel, a.surface_roughness, b, hit->first, hit->second);
        }
    }
    next.contacts = std::move(contacts);

    // Impacts felt through the hand: new contacts that involve the grasped cube.
    if (next.grasp_binding) {
        const SceneObject* held = next.find(*next.grasp_binding);
        for (const auto& c : next.contacts) {
            if (!c.is_new || c.normal_speed <= 0.0) continue;
            if (c.a != held->id && c.b != held->id) continue;
            const Eigen::Vector3d push = c.b == held->id ? c.normal : Eigen::Vector3d(-c.normal);
            ImpulsePulse pulse;
            pulse.kind = PulseKind::impact;
            pulse.force = held->mass * c.normal_speed / pulse.duration * push;
            pulse.start = next.time;
            next.pulses.push_back(pulse);
        }
    }
    std::erase_if(next.pulses, [&](const ImpulsePulse& pl) { return next.time - pl.start >= pl.duration - 1e-9; });
    return next;
}

double placement_accuracy(const Eigen::Vector3d& cube_final, const Eigen::Vector3d& target_center) {
    const double dx = target_center.x() - cube_final.x();
    const double dy = target_center.y() - cube_final.y();
    return std::sqrt(dx * dx + dy * dy);
}

double time_on_task(double t_grab, double t_drop) {
    if (t_drop < t_grab) {
        throw InvalidIntervalError("drop time precedes grab time");
    }
    return t_drop - t_grab;
}

bool placement_gate(const SceneObject& cube, const SceneObject& target, double margin) {
    const Eigen::Vector3d d = (cube.pose.position - target.pose.position).cwiseAbs();
    const Eigen::Vector3d box = target.half_extents + Eigen::Vector3d::Constant(margin);
    return (d.array() <= box.array()).all();
}

} // namespace telesim
