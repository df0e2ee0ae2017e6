// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Explicit Gaussian scene representation. Scales are stored in log space and
// opacity as a logit so that unconstrained optimizer steps keep every
// primitive valid.

#pragma once

#include "evsplat/sh.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace evsplat {

struct GaussianPrimitive {
    Eigen::Vector3d position  = Eigen::Vector3d::Zero();
    Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
    /// Raw quaternion (w, x, y, z); normalized wherever it is consumed.
    Eigen::Vector4d rotation      = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
    double          opacity_logit = 0.0;
    /// sh[k] holds coefficient k for the R, G and B channels.
    std::vector<Eigen::Vector3d> sh = std::vector<Eigen::Vector3d>(1, Eigen::Vector3d::Zero());

    double opacity() const;
    Eigen::Quaterniond unit_rotation() const;
};

struct Scene {
    std::vector<GaussianPrimitive> gaussians;
    Eigen::Vector3d                background = Eigen::Vector3d::Zero();
    int                            sh_degree  = 1;

    size_t
    size() const {
        return gaussians.size();
    }

    /// Throws std::invalid_argument if any primitive has the wrong SH count.
    void validate() const;
};

struct CameraIntrinsics {
    double fx     = 1.0;
    double fy     = 1.0;
    double cx     = 0.0;
    double cy     = 0.0;
    int    width  = 1;
    int    height = 1;

    void validate() const;
};

double sigmoid(double x);
double logit(double p);

/// Sigma = R diag(exp(2 log_scale)) R^T.
Eigen::Matrix3d covariance_of(const GaussianPrimitive &g);

/// View-dependent RGB along a unit direction, offset by 0.5 and clamped at 0.
Eigen::Vector3d sh_to_color(const GaussianPrimitive &g, int sh_degree, const Eigen::Vector3d &view_dir);

/// SH degree-0 coefficient that reproduces a given base color.
Eigen::Vector3d rgb_to_sh0(const Eigen::Vector3d &rgb);

struct SceneInitOptions {
    int             sh_degree    = 1;
    double          scale_factor = 0.5; ///< exp(log_scale) = factor * mean k-NN distance
    int             neighbors    = 3;
    double          default_scale = 0.05; ///< used for a lone point
    double          initial_opacity = 0.1;
    Eigen::Vector3d background    = Eigen::Vector3d::Zero();
};

struct Bounds {
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(-1.0);
    Eigen::Vector3d hi = Eigen::Vector3d::Constant(1.0);
};

/// One Gaussian per point. Colors default to gray (zero SH).
Scene init_scene(const std::vector<Eigen::Vector3d> &points, const SceneInitOptions &opts,
                 const std::vector<Eigen::Vector3d> &colors = {});

/// `count` points drawn uniformly inside `bounds` with a seeded generator.
Scene init_scene(int count, uint64_t rng_seed, const Bounds &bounds, const SceneInitOptions &opts);

// JSON persistence, see scene_io.cpp for the schema.
void  save_scene(const std::filesystem::path &path, const Scene &scene);
Scene load_scene(const std::filesystem::path &path);

} // namespace evsplat
