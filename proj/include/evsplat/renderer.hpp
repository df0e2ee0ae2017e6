// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// CPU splatting renderer with analytic reverse-mode gradients.
//
// Pixels are addressed by their centres: pixel (x, y) sits at image
// coordinate (x, y), so a point on the optical axis lands at (cx, cy).
// All compositing and blur averaging happens in linear radiance.

#pragma once

#include "evsplat/geometry.hpp"
#include "evsplat/image.hpp"
#include "evsplat/scene.hpp"

#include <optional>
#include <vector>

namespace evsplat {

struct RenderOptions {
    double near_plane = 0.01;
    double low_pass   = 0.3; ///< px^2 added to each cov2d diagonal entry
    double alpha_cap  = 0.99;
    double alpha_min  = 1.0 / 255.0;
    /// Worker threads for row-band parallelism. Results do not depend on it.
    int threads = 1;
};

struct Projected2D {
    Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov2d  = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d conic  = Eigen::Matrix2d::Identity();
    double          depth  = 0.0;
    Eigen::Vector3d color  = Eigen::Vector3d::Zero();
    double          alpha  = 0.0;
    /// Inclusive pixel bounding box of the footprint, clipped to the image.
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

/// Returns std::nullopt when the Gaussian is culled (behind the near plane,
/// too transparent to ever pass the skip threshold, or footprint outside the
/// image). The footprint extends to the Mahalanobis radius at which
/// alpha * G drops to alpha_min, so culling never changes the image.
std::optional<Projected2D> project_gaussian(const GaussianPrimitive &g, int sh_degree, const Pose &pose,
                                            const CameraIntrinsics &K, const RenderOptions &opts = {});

struct RenderResult {
    RadianceImage image;
    /// Per-pixel transmittance left after the last Gaussian (row-major).
    std::vector<double> final_transmittance;
};

RenderResult render_full(const Scene &scene, const Pose &pose, const CameraIntrinsics &K,
                         const RenderOptions &opts = {});

RadianceImage render(const Scene &scene, const Pose &pose, const CameraIntrinsics &K, const RenderOptions &opts = {});

struct BlurRender {
    RadianceImage              blurred;
    std::vector<RadianceImage> latents;
    std::vector<double>        times;
    std::vector<Pose>          poses;
};

/// Mean of n sharp renders at latent_timestamps(traj, n).
BlurRender render_blurred(const Scene &scene, const ExposureTrajectory &traj, int n, const CameraIntrinsics &K,
                          const RenderOptions &opts = {});

/// Same layout as GaussianPrimitive, holding partial derivatives.
struct GaussianGrad {
    Eigen::Vector3d              position      = Eigen::Vector3d::Zero();
    Eigen::Vector3d              log_scale     = Eigen::Vector3d::Zero();
    Eigen::Vector4d              rotation      = Eigen::Vector4d::Zero();
    double                       opacity_logit = 0.0;
    std::vector<Eigen::Vector3d> sh;

    GaussianGrad &operator+=(const GaussianGrad &o);
    bool          all_finite() const;
};

struct GradientBuffer {
    std::vector<GaussianGrad> gaussians;
    Twist                     twist_start;
    Twist                     twist_end;
    double                    loss = 0.0;

    bool all_finite() const;
};

/// Gradient of sum(adjoint .* render(scene, pose)) with respect to the scene
/// and the left perturbation of `pose`. The scene part is accumulated into
/// `scene_grad` (sized on first use); the pose part is returned.
Vector6d backward_view(const Scene &scene, const Pose &pose, const CameraIntrinsics &K, const RadianceImage &adjoint,
                       std::vector<GaussianGrad> &scene_grad, const RenderOptions &opts = {});

/// Gradient of sum_i sum(adjoint_i .* C_{t_i}) where C_{t_i} are the latent
/// renders at `times` along `traj`. Endpoint twists are left perturbations.
GradientBuffer backward_latents(const Scene &scene, const ExposureTrajectory &traj, const CameraIntrinsics &K,
                                const std::vector<double> &times, const std::vector<RadianceImage> &adjoints,
                                const RenderOptions &opts = {});

/// Gradient of sum(adjoint .* render_blurred(scene, traj, n).blurred).
GradientBuffer render_with_grad(const Scene &scene, const ExposureTrajectory &traj, const CameraIntrinsics &K, int n,
                                const RadianceImage &adjoint, const RenderOptions &opts = {});

} // namespace evsplat
