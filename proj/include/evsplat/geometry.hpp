// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Rigid-body poses on SE(3), se(3) twists and linear intra-exposure
// trajectories.
//
// Conventions used throughout the project:
//   * Quaternions are scalar-first (w, x, y, z) when serialized.
//   * A Pose maps world points into the camera frame: x_cam = R * x_world + t.
//   * Twists are ordered (omega, v): three rotational components first,
//     then three translational components.
//   * Pose perturbations are applied on the left: P' = exp(delta) * P.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <vector>

namespace evsplat {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Below this rotation angle (radians) the exp/log maps use Taylor branches.
inline constexpr double kSmallAngle = 1e-6;

struct Twist {
    Eigen::Vector3d omega = Eigen::Vector3d::Zero();
    Eigen::Vector3d v     = Eigen::Vector3d::Zero();

    Twist() = default;
    Twist(const Eigen::Vector3d &omega_, const Eigen::Vector3d &v_) : omega(omega_), v(v_) {}
    explicit Twist(const Vector6d &xi) : omega(xi.head<3>()), v(xi.tail<3>()) {}

    Vector6d
    vector() const {
        Vector6d xi;
        xi << omega, v;
        return xi;
    }

    Twist
    operator*(double s) const {
        return {omega * s, v * s};
    }
};

/// World-to-camera rigid transform.
struct Pose {
    Eigen::Quaterniond rotation    = Eigen::Quaterniond::Identity();
    Eigen::Vector3d    translation = Eigen::Vector3d::Zero();

    Pose() = default;
    Pose(const Eigen::Quaterniond &q, const Eigen::Vector3d &t) : rotation(q.normalized()), translation(t) {}

    static Pose
    identity() {
        return {};
    }

    Eigen::Matrix3d
    R() const {
        return rotation.toRotationMatrix();
    }

    Eigen::Vector3d
    apply(const Eigen::Vector3d &x) const {
        return rotation * x + translation;
    }

    Pose inverse() const;

    /// Camera centre in world coordinates.
    Eigen::Vector3d
    center() const {
        return -(rotation.conjugate() * translation);
    }

    /// 6x6 adjoint for the (omega, v) twist ordering.
    Matrix6d adjoint() const;
};

Pose operator*(const Pose &a, const Pose &b);

Eigen::Matrix3d hat(const Eigen::Vector3d &w);

Pose  se3_exp(const Twist &xi);
/// Throws std::domain_error when the rotation angle reaches pi.
Twist se3_log(const Pose &p);

/// ad(xi) in the (omega, v) ordering.
Matrix6d se3_ad(const Twist &xi);

/// Left Jacobian of SE(3): exp(xi + d) ~= exp(J_l(xi) d) * exp(xi).
Matrix6d se3_left_jacobian(const Twist &xi);

/// Geodesic rotation angle between two poses (radians).
double rotation_angle_between(const Pose &a, const Pose &b);

struct ExposureTrajectory {
    Pose   pose_start;
    Pose   pose_end;
    double t_start = 0.0;
    double t_end   = 1.0;

    ExposureTrajectory() = default;
    ExposureTrajectory(const Pose &start, const Pose &end, double ts, double te);

    double
    duration() const {
        return t_end - t_start;
    }

    double
    mid_time() const {
        return 0.5 * (t_start + t_end);
    }

    /// Normalized position s in [0, 1] of time t inside the window.
    double fraction(double t) const;
};

/// P(t) = pose_start * exp(s * log(pose_start^-1 * pose_end)).
Pose interpolate_pose(const ExposureTrajectory &traj, double t);

/// For a trajectory whose endpoints are left-perturbed by (delta_start,
/// delta_end), returns the 6x6 matrices (A, B) such that the left
/// perturbation of the interpolated pose at fraction s is
/// A * delta_start + B * delta_end to first order.
struct InterpolationJacobian {
    Matrix6d wrt_start;
    Matrix6d wrt_end;
};
InterpolationJacobian interpolation_jacobian(const ExposureTrajectory &traj, double s);

/// n equally spaced times spanning [t_start, t_end] (n odd). Index (n-1)/2
/// is the mid-exposure time.
std::vector<double> latent_timestamps(const ExposureTrajectory &traj, int n);

} // namespace evsplat
