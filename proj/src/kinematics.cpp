#include "telesim/kinematics.hpp"

#include "telesim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace telesim {

namespace {

Eigen::Matrix3d rpy_to_matrix(const Eigen::Vector3d& rpy) {
    return (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
            Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

Eigen::Vector3d rotation_error(const Eigen::Quaterniond& target, const Eigen::Quaterniond& current) {
    Eigen::Quaterniond err = target * current.conjugate();
    if (err.w() < 0.0) {
        err.coeffs() = -err.coeffs();
    }
    const double vnorm = err.vec().norm();
    if (vnorm < 1e-15) {
        return 2.0 * err.vec();
    }
    return (2.0 * std::atan2(vnorm, err.w()) / vnorm) * err.vec();
}

struct Residual {
    Eigen::Vector3d position;
    Eigen::Vector3d orientation;
    double combined = 0.0;
};

Residual evaluate(const ArmModel& model, const JointVector& q, const Pose& target, double w) {
    const Eigen::Isometry3d tcp = chain_frames(model, q).tcp;
    Residual r;
    r.position = target.position - tcp.translation();
    r.orientation = rotation_error(target.orientation, Eigen::Quaterniond(tcp.linear()));
    r.combined = std::sqrt(r.position.squaredNorm() + w * w * r.orientation.squaredNorm());
    return r;
}

} // namespace

Eigen::Isometry3d Pose::to_isometry() const {
    Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
    iso.linear() = orientation.normalized().toRotationMatrix();
    iso.translation() = position;
    return iso;
}

Pose Pose::from_isometry(const Eigen::Isometry3d& iso) {
    Pose p;
    p.position = iso.translation();
    p.orientation = Eigen::Quaterniond(iso.linear()).normalized();
    return p;
}

double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
    return rotation_error(a, b).norm();
}

ArmModel::ArmModel(const std::array<LinkSpec, kNumJoints>& links,
                   const Eigen::Isometry3d& flange_to_tcp, const Pose& base_pose, double max_aperture)
    : links_(links), flange_to_tcp_(flange_to_tcp), base_pose_(base_pose),
      max_aperture_(max_aperture) {
    max_reach_ = flange_to_tcp_.translation().norm();
    for (std::size_t i = 0; i < links_.size(); ++i) {
        const auto& link = links_[i];
        if (!(link.limit.lower < link.limit.upper)) {
            throw ConfigError("joint " + std::to_string(i + 1) + " has a degenerate limit interval");
        }
        if (link.axis.norm() < 1e-12) {
            throw ConfigError("joint " + std::to_string(i + 1) + " has a zero axis");
        }
        links_[i].axis.normalize();
        Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();
        origin.linear() = rpy_to_matrix(link.origin_rpy);
        origin.translation() = link.origin_xyz;
        origins_[i] = origin;
        if (i > 0) {
            max_reach_ += link.origin_xyz.norm();
        }
    }
    if (max_aperture_ <= 0.0) {
        throw ConfigError("gripper max aperture must be positive");
    }
}

ArmModel ArmModel::panda() {
    using std::numbers::pi;
    const double h = pi / 2.0;
    std::array<LinkSpec, kNumJoints> links{{
        {{0.0, 0.0, 0.333}, {0.0, 0.0, 0.0}, Eigen::Vector3d::UnitZ(), {-2.8973, 2.8973}},
        {{0.0, 0.0, 0.0}, {-h, 0.0, 0.0}, Eigen::Vector3d::UnitZ(), {-1.7628, 1.7628}},
        {{0.0, -0.316, 0.0}, {h, 0.0, 0.0}, Eigen::Vector3d::UnitZ(), {-2.8973, 2.8973}},
        // upper bound widened from -0.0698 to 0
        {{0.0825, 0.0, 0.0}, {h, 0.0, 0.0}, Eigen::Vector3d::UnitZ(), {-3.0718, 0.0}},
        {{-0.0825, 0.384, 0.0}, {-h, 0.0, 0.0}, Eigen::Vector3d::UnitZ(), {-2.8973, 2.8973}},
        {{0.0, 0.0, 0.0}, {h, 0.0, 0.0}, Eigen::Vector3d::UnitZ(), {-0.0175, 3.7525}},
        {{0.088, 0.0, 0.0}, {h, 0.0, 0.0}, Eigen::Vector3d::UnitZ(), {-2.8973, 2.8973}},
    }};
    Eigen::Isometry3d tcp = Eigen::Isometry3d::Identity();
    tcp.translate(Eigen::Vector3d(0.0, 0.0, 0.107));
    tcp.rotate(Eigen::AngleAxisd(-pi / 4.0, Eigen::Vector3d::UnitZ()));
    tcp.translate(Eigen::Vector3d(0.0, 0.0, 0.1034));
    return ArmModel(links, tcp, Pose{}, 0.08);
}

bool ArmModel::within_limits(const JointVector& q) const {
    for (int i = 0; i < kNumJoints; ++i) {
        const auto& lim = links_[static_cast<std::size_t>(i)].limit;
        if (!(q[i] >= lim.lower && q[i] <= lim.upper)) {
            return false;
        }
    }
    return true;
}

JointVector ArmModel::clamp(const JointVector& q) const {
    JointVector out;
    for (int i = 0; i < kNumJoints; ++i) {
        const auto& lim = links_[static_cast<std::size_t>(i)].limit;
        out[i] = std::clamp(q[i], lim.lower, lim.upper);
    }
    return out;
}

JointVector ArmModel::mid_range() const { return 0.5 * (lower_limits() + upper_limits()); }

JointVector ArmModel::lower_limits() const {
    JointVector v;
    for (int i = 0; i < kNumJoints; ++i) v[i] = links_[static_cast<std::size_t>(i)].limit.lower;
    return v;
}

JointVector ArmModel::upper_limits() const {
    JointVector v;
    for (int i = 0; i < kNumJoints; ++i) v[i] = links_[static_cast<std::size_t>(i)].limit.upper;
    return v;
}

Eigen::Vector3d ArmModel::shoulder_position() const {
    return base_pose_.to_isometry() * links_[0].origin_xyz;
}

void check_joint_state(const ArmModel& model, const JointState& joints) {
    for (int i = 0; i < kNumJoints; ++i) {
        const auto& lim = model.links()[static_cast<std::size_t>(i)].limit;
        const double a = joints.angles[i];
        if (!(a >= lim.lower && a <= lim.upper)) {
            std::ostringstream os;
            os << "joint " << (i + 1) << " angle " << a << " outside [" << lim.lower << ", "
               << lim.upper << "]";
            throw JointLimitError(os.str());
        }
    }
    if (!(joints.gripper_aperture >= 0.0 && joints.gripper_aperture <= model.max_aperture())) {
        throw JointLimitError("gripper aperture outside [0, max_aperture]");
    }
}

ChainFrames chain_frames(const ArmModel& model, const JointVector& q) {
    ChainFrames frames;
    Eigen::Isometry3d t = model.base_pose().to_isometry();
    for (int i = 0; i < kNumJoints; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        t = t * model.joint_origin(i);
        const Eigen::Vector3d& axis = model.links()[idx].axis;
        frames.joint_positions[idx] = t.translation();
        frames.joint_axes[idx] = t.linear() * axis;
        t.rotate(Eigen::AngleAxisd(q[i], axis));
    }
    frames.tcp = t * model.flange_to_tcp();
    return frames;
}

Pose forward_kinematics(const ArmModel& model, const JointState& joints) {
    check_joint_state(model, joints);
    return Pose::from_isometry(chain_frames(model, joints.angles).tcp);
}

Jacobian geometric_jacobian(const ArmModel& model, const JointVector& q) {
    const ChainFrames f = chain_frames(model, q);
    const Eigen::Vector3d p = f.tcp.translation();
    Jacobian j;
    for (int i = 0; i < kNumJoints; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        j.block<3, 1>(0, i) = f.joint_axes[idx].cross(p - f.joint_positions[idx]);
        j.block<3, 1>(3, i) = f.joint_axes[idx];
    }
    return j;
}

namespace {

struct Descent {
    JointVector q;
    Residual residual;
    int iterations = 0;
};

// One damped least-squares descent from q0. Stops on convergence, on budget
// exhaustion, or when the residual stagnates.
Descent descend(const ArmModel& model, const Pose& target, const JointVector& q0,
                const IkOptions& options, int budget, std::vector<double>* residuals) {
    const double w = options.orientation_weight;
    Eigen::Matrix<double, 6, 1> weights;
    weights << 1.0, 1.0, 1.0, w, w, w;

    Descent d{model.clamp(q0), {}, 0};
    d.residual = evaluate(model, d.q, target, w);
    if (residuals) residuals->push_back(d.residual.combined);

    const JointVector mid = model.mid_range();
    double lambda = options.damping;
    bool use_nullspace = true;
    int rejected_in_row = 0;
    double window_start = d.residual.combined;
    int window_count = 0;

    auto converged = [&](const Residual& res) {
        return res.position.norm() < options.position_tolerance &&
               res.orientation.norm() < options.orientation_tolerance;
    };

    while (d.iterations < budget && !converged(d.residual)) {
        ++d.iterations;
        const Jacobian jfull = weights.asDiagonal() * geometric_jacobian(model, d.q);
        Eigen::Matrix<double, 6, 1> e;
        e << d.residual.position, w * d.residual.orientation;

        // Joints pinned at a limit and pushed outward are locked and the step re-solved.
        std::array<bool, kNumJoints> locked{};
        JointVector dq = JointVector::Zero();
        for (int pass = 0; pass < 3; ++pass) {
            Jacobian jw = jfull;
            for (int i = 0; i < kNumJoints; ++i) {
                if (locked[static_cast<std::size_t>(i)]) jw.col(i).setZero();
            }
            const Eigen::Matrix<double, 6, 6> a =
                jw * jw.transpose() + lambda * lambda * Eigen::Matrix<double, 6, 6>::Identity();
            dq = jw.transpose() * a.ldlt().solve(e);
            if (use_nullspace && options.nullspace_gain > 0.0) {
                const Eigen::JacobiSVD<Jacobian> svd(jw, Eigen::ComputeFullV);
                const auto& sv = svd.singularValues();
                int rank = 0;
                while (rank < sv.size() && sv[rank] > 1e-6) ++rank;
                JointVector pull = options.nullspace_gain * (mid - d.q);
                for (int i = 0; i < kNumJoints; ++i) {
                    if (locked[static_cast<std::size_t>(i)]) pull[i] = 0.0;
                }
                const auto range = svd.matrixV().leftCols(rank);
                dq += pull - range * (range.transpose() * pull);
            }
            bool changed = false;
            for (int i = 0; i < kNumJoints; ++i) {
                const auto idx = static_cast<std::size_t>(i);
                const auto& lim = model.links()[idx].limit;
                const double next = d.q[i] + dq[i];
                if (!locked[idx] && ((next > lim.upper && d.q[i] >= lim.upper - 1e-9) ||
                                     (next < lim.lower && d.q[i] <= lim.lower + 1e-9))) {
                    locked[idx] = true;
                    changed = true;
                }
            }
            if (!changed) break;
            for (int i = 0; i < kNumJoints; ++i) {
                if (locked[static_cast<std::size_t>(i)]) dq[i] = 0.0;
            }
        }
        const double step = dq.cwiseAbs().maxCoeff();
        if (step > options.max_step) {
            dq *= options.max_step / step;
        }

        const JointVector candidate = model.clamp(d.q + dq);
        const Residual rc = evaluate(model, candidate, target, w);
        if (rc.combined < d.residual.combined) {
            d.q = candidate;
            d.residual = rc;
            lambda = std::max(options.min_damping, lambda * 0.5);
            use_nullspace = true;
            rejected_in_row = 0;
            if (residuals) residuals->push_back(d.residual.combined);
        } else {
            lambda *= 4.0;
            use_nullspace = false;
            ++rejected_in_row;
        }

        if (++window_count == options.stagnation_window) {
            const bool stalled = d.residual.combined > 0.9 * window_start;
            window_start = d.residual.combined;
            window_count = 0;
            if (stalled) break;
        }
        if (rejected_in_row >= 6) break;
    }
    return d;
}

} // namespace

JointState solve_ik(const ArmModel& model, const Pose& target, const JointState& seed,
                    const IkOptions& options, IkTrace* trace) {
    // Deterministic restart seeds, tried only when a descent stalls.
    std::vector<JointVector> starts{seed.angles, model.mid_range()};
    for (double wrist : {1.5, -1.5}) {
        JointVector s = seed.angles;
        s[6] += wrist;
        starts.push_back(s);
    }
    for (double base : {0.8, -0.8}) {
        JointVector s = model.mid_range();
        s[0] += base;
        starts.push_back(s);
    }

    auto converged = [&](const Residual& res) {
        return res.position.norm() < options.position_tolerance &&
               res.orientation.norm() < options.orientation_tolerance;
    };

    int budget = options.max_iterations;
    std::optional<Descent> best;
    for (const JointVector& start : starts) {
        if (budget <= 0) break;
        std::vector<double>* residuals = nullptr;
        if (trace) {
            trace->attempts.emplace_back();
            residuals = &trace->attempts.back();
        }
        Descent d = descend(model, target, start, options, budget, residuals);
        budget -= std::max(d.iterations, 1);
        if (!best || d.residual.combined < best->residual.combined) {
            best = d;
        }
        if (converged(d.residual)) break;
    }

    if (!converged(best->residual)) {
        std::ostringstream os;
        os << "IK did not converge: position residual " << best->residual.position.norm()
           << " m, orientation residual " << best->residual.orientation.norm() << " rad";
        throw ConvergenceError(os.str(), best->residual.position.norm(),
                               best->residual.orientation.norm());
    }

    JointState out;
    out.angles = best->q;
    out.gripper_aperture = std::clamp(seed.gripper_aperture, 0.0, model.max_aperture());
    out.timestamp = seed.timestamp;
    return out;
}

bool TaskWorkspace::contains(const Pose& pose, const Pose& home) const {
    const Eigen::Vector3d& p = pose.position;
    if ((p.array() < min_corner.array()).any() || (p.array() > max_corner.array()).any()) {
        return false;
    }
    const Eigen::Vector3d approach = pose.orientation * Eigen::Vector3d::UnitZ();
    const double tilt = std::acos(std::clamp(-approach.z(), -1.0, 1.0));
    return tilt <= max_tilt && angular_distance(pose.orientation, home.orientation) <= max_rotation;
}

JointVector ready_configuration() {
    JointVector q;
    q << 0.0, -0.3, 0.0, -2.2, 0.0, 2.0, std::numbers::pi / 4.0;
    return q;
}

} // namespace telesim
