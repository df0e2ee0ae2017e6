// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace evsplat {

Eigen::Matrix3d
hat(const Eigen::Vector3d &w) {
    Eigen::Matrix3d m;
    m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
    return m;
}

Pose
Pose::inverse() const {
    Pose out;
    out.rotation    = rotation.conjugate();
    out.translation = -(out.rotation * translation);
    return out;
}

Matrix6d
Pose::adjoint() const {
    const Eigen::Matrix3d Rm = R();
    Matrix6d              ad = Matrix6d::Zero();
    ad.topLeftCorner<3, 3>()     = Rm;
    ad.bottomLeftCorner<3, 3>()  = hat(translation) * Rm;
    ad.bottomRightCorner<3, 3>() = Rm;
    return ad;
}

Pose
operator*(const Pose &a, const Pose &b) {
    Pose out;
    out.rotation    = (a.rotation * b.rotation).normalized();
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

namespace {

// V = I + (1 - cos t)/t^2 W + (t - sin t)/t^3 W^2
Eigen::Matrix3d
left_jacobian_so3(const Eigen::Vector3d &omega) {
    const double          theta = omega.norm();
    const Eigen::Matrix3d W     = hat(omega);
    if (theta < kSmallAngle) {
        return Eigen::Matrix3d::Identity() + 0.5 * W + (1.0 / 6.0) * W * W;
    }
    const double t2 = theta * theta;
    return Eigen::Matrix3d::Identity() + ((1.0 - std::cos(theta)) / t2) * W +
           ((theta - std::sin(theta)) / (t2 * theta)) * W * W;
}

Eigen::Matrix3d
left_jacobian_so3_inverse(const Eigen::Vector3d &omega) {
    const double          theta = omega.norm();
    const Eigen::Matrix3d W     = hat(omega);
    if (theta < kSmallAngle) {
        return Eigen::Matrix3d::Identity() - 0.5 * W + (1.0 / 12.0) * W * W;
    }
    const double half = 0.5 * theta;
    const double coef = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
    return Eigen::Matrix3d::Identity() - 0.5 * W + coef * W * W;
}

} // namespace

Pose
se3_exp(const Twist &xi) {
    const double theta = xi.omega.norm();
    double       k; // sin(theta/2) / theta
    if (theta < kSmallAngle) {
        k = 0.5 - theta * theta / 48.0;
    } else {
        k = std::sin(0.5 * theta) / theta;
    }
    Eigen::Quaterniond q(std::cos(0.5 * theta), k * xi.omega.x(), k * xi.omega.y(), k * xi.omega.z());
    Pose               out;
    out.rotation    = q.normalized();
    out.translation = left_jacobian_so3(xi.omega) * xi.v;
    return out;
}

Twist
se3_log(const Pose &p) {
    Eigen::Quaterniond q = p.rotation.normalized();
    if (q.w() < 0.0) {
        q.coeffs() = -q.coeffs();
    }
    const Eigen::Vector3d qv    = q.vec();
    const double          sn    = qv.norm();
    const double          theta = 2.0 * std::atan2(sn, q.w());
    if (theta >= std::numbers::pi - 1e-9) {
        throw std::domain_error("se3_log: rotation angle " + std::to_string(theta) + " is at pi (degenerate)");
    }
    Eigen::Vector3d omega;
    if (theta < kSmallAngle) {
        // theta / sin(theta/2) ~= 2 / w * (1 + sn^2 / (6 w^2)) for small angles
        omega = (2.0 / q.w()) * (1.0 - sn * sn / (3.0 * q.w() * q.w())) * qv;
    } else {
        omega = (theta / sn) * qv;
    }
    return {omega, left_jacobian_so3_inverse(omega) * p.translation};
}

Matrix6d
se3_ad(const Twist &xi) {
    Matrix6d ad = Matrix6d::Zero();
    const Eigen::Matrix3d W = hat(xi.omega);
    ad.topLeftCorner<3, 3>()     = W;
    ad.bottomLeftCorner<3, 3>()  = hat(xi.v);
    ad.bottomRightCorner<3, 3>() = W;
    return ad;
}

Matrix6d
se3_left_jacobian(const Twist &xi) {
    // sum_k ad^k / (k+1)!; the series is entire so truncation is purely a
    // matter of the term magnitude dropping below machine precision.
    const Matrix6d ad   = se3_ad(xi);
    Matrix6d       term = Matrix6d::Identity();
    Matrix6d       sum  = Matrix6d::Identity();
    for (int k = 1; k < 200; ++k) {
        term = term * ad / static_cast<double>(k + 1);
        sum += term;
        if (term.lpNorm<Eigen::Infinity>() <= 1e-18 * sum.lpNorm<Eigen::Infinity>()) {
            break;
        }
    }
    return sum;
}

double
rotation_angle_between(const Pose &a, const Pose &b) {
    const Eigen::Quaterniond rel = (a.rotation.conjugate() * b.rotation).normalized();
    return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

ExposureTrajectory::ExposureTrajectory(const Pose &start, const Pose &end, double ts, double te)
    : pose_start(start), pose_end(end), t_start(ts), t_end(te) {
    if (!(te > ts)) {
        throw std::invalid_argument("ExposureTrajectory: t_end must be greater than t_start");
    }
}

double
ExposureTrajectory::fraction(double t) const {
    if (!(t >= t_start && t <= t_end)) {
        throw std::out_of_range("ExposureTrajectory: time " + std::to_string(t) + " outside exposure window [" +
                                std::to_string(t_start) + ", " + std::to_string(t_end) + "]");
    }
    return (t - t_start) / (t_end - t_start);
}

Pose
interpolate_pose(const ExposureTrajectory &traj, double t) {
    const double s = traj.fraction(t);
    if (s == 0.0) {
        return traj.pose_start;
    }
    const Twist rel = se3_log(traj.pose_start.inverse() * traj.pose_end);
    return traj.pose_start * se3_exp(rel * s);
}

InterpolationJacobian
interpolation_jacobian(const ExposureTrajectory &traj, double s) {
    // P(s) = A exp(s xi), xi = log(A^-1 B). Left-perturbing B by d moves xi by
    // J_l(xi)^-1 Ad(A^-1) d, hence P by Ad(A) s J_l(s xi) J_l(xi)^-1 Ad(A^-1) d.
    // Left-perturbing A by d moves P by d minus the same expression.
    const Twist    xi    = se3_log(traj.pose_start.inverse() * traj.pose_end);
    const Matrix6d adA   = traj.pose_start.adjoint();
    const Matrix6d adInv = traj.pose_start.inverse().adjoint();
    const Matrix6d Jl    = se3_left_jacobian(xi);
    const Matrix6d Jls   = se3_left_jacobian(xi * s);
    const Matrix6d M     = s * adA * Jls * Jl.inverse() * adInv;
    return {Matrix6d::Identity() - M, M};
}

std::vector<double>
latent_timestamps(const ExposureTrajectory &traj, int n) {
    if (n < 1 || n % 2 == 0) {
        throw std::invalid_argument("latent_timestamps: n must be a positive odd integer, got " + std::to_string(n));
    }
    if (n == 1) {
        return {traj.mid_time()};
    }
    std::vector<double> out(static_cast<size_t>(n));
    const double        step = traj.duration() / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) {
        out[static_cast<size_t>(i)] = traj.t_start + step * i;
    }
    out.back()                                 = traj.t_end;
    out[static_cast<size_t>((n - 1) / 2)]      = traj.mid_time();
    return out;
}

} // namespace evsplat
