#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace telesim {

inline constexpr int kNumJoints = 7;

using JointVector = Eigen::Matrix<double, kNumJoints, 1>;
using Jacobian = Eigen::Matrix<double, 6, kNumJoints>;

struct Pose {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

    Eigen::Isometry3d to_isometry() const;
    static Pose from_isometry(const Eigen::Isometry3d& iso);
};

/// Orientation error as a rotation angle in [0, pi].
double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

struct JointState {
    JointVector angles = JointVector::Zero();
    double gripper_aperture = 0.0; // meters
    double timestamp = 0.0;        // seconds since trial start
};

struct JointLimit {
    double lower = 0.0;
    double upper = 0.0;
};

/// One revolute joint: fixed transform from the previous joint frame, then a
/// rotation about `axis` (expressed in the joint frame).
struct LinkSpec {
    Eigen::Vector3d origin_xyz = Eigen::Vector3d::Zero();
    Eigen::Vector3d origin_rpy = Eigen::Vector3d::Zero();
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    JointLimit limit;
};

class ArmModel {
  public:
    ArmModel(const std::array<LinkSpec, kNumJoints>& links, const Eigen::Isometry3d& flange_to_tcp,
             const Pose& base_pose, double max_aperture);

    /// Panda-like default table (URDF joint origins, hand + TCP offset).
    static ArmModel panda();

    const std::array<LinkSpec, kNumJoints>& links() const { return links_; }
    const Eigen::Isometry3d& flange_to_tcp() const { return flange_to_tcp_; }
    const Pose& base_pose() const { return base_pose_; }
    double max_aperture() const { return max_aperture_; }

    /// Fixed transform of joint i (origin_xyz, origin_rpy), precomputed.
    const Eigen::Isometry3d& joint_origin(int i) const { return origins_[static_cast<std::size_t>(i)]; }

    bool within_limits(const JointVector& q) const;
    JointVector clamp(const JointVector& q) const;
    JointVector mid_range() const;
    JointVector lower_limits() const;
    JointVector upper_limits() const;

    /// Conservative reach bound: distance from the shoulder to the TCP can not exceed this.
    double max_reach() const { return max_reach_; }
    Eigen::Vector3d shoulder_position() const;

  private:
    std::array<LinkSpec, kNumJoints> links_;
    std::array<Eigen::Isometry3d, kNumJoints> origins_;
    Eigen::Isometry3d flange_to_tcp_;
    Pose base_pose_;
    double max_aperture_;
    double max_reach_;
};

/// Validates joints against the model; throws JointLimitError.
void check_joint_state(const ArmModel& model, const JointState& joints);

Pose forward_kinematics(const ArmModel& model, const JointState& joints);

/// Frames of every joint (after its fixed origin, before its rotation is irrelevant
/// for the axis) plus the TCP; index 7 is the TCP.
struct ChainFrames {
    std::array<Eigen::Vector3d, kNumJoints> joint_positions;
    std::array<Eigen::Vector3d, kNumJoints> joint_axes; // world frame
    Eigen::Isometry3d tcp = Eigen::Isometry3d::Identity();
};

ChainFrames chain_frames(const ArmModel& model, const JointVector& q);
Jacobian geometric_jacobian(const ArmModel& model, const JointVector& q);

struct IkOptions {
    double damping = 0.05;      // initial Levenberg damping
    double min_damping = 0.005; // floor reached by halving after accepted steps
    int max_iterations = 100;
    double position_tolerance = 1e-3;    // m
    double orientation_tolerance = 1e-2; // rad
    double orientation_weight = 0.5;     // m per rad in the combined residual
    double nullspace_gain = 0.05;
    double max_step = 0.4; // rad, per iteration
    int stagnation_window = 10; // iterations; <10% progress over a window restarts
};

struct IkTrace {
    /// Combined residual after each accepted iterate, one list per descent
    /// (a stalled descent is restarted from the next deterministic seed).
    std::vector<std::vector<double>> attempts;
};

/// Damped least-squares IK with a mid-range null-space objective. The
/// iteration budget is shared across restarts. Throws ConvergenceError when
/// tolerances are not met within max_iterations.
JointState solve_ik(const ArmModel& model, const Pose& target, const JointState& seed,
                    const IkOptions& options = {}, IkTrace* trace = nullptr);

/// Region the solver is documented to cover from the ready seed: a box in front
/// of the base with the gripper within `max_tilt` of pointing down and within
/// `max_rotation` of the home orientation.
struct TaskWorkspace {
    Eigen::Vector3d min_corner{0.25, -0.40, 0.02};
    Eigen::Vector3d max_corner{0.70, 0.40, 0.45};
    double max_tilt = 0.35;
    double max_rotation = 1.5;

    bool contains(const Pose& pose, const Pose& home) const;
};

/// Panda "ready" configuration used as the default seed and home.
JointVector ready_configuration();

} // namespace telesim
