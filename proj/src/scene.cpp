// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace evsplat {

double
sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

double
logit(double p) {
    return std::log(p / (1.0 - p));
}

double
GaussianPrimitive::opacity() const {
    return sigmoid(opacity_logit);
}

Eigen::Quaterniond
GaussianPrimitive::unit_rotation() const {
    return Eigen::Quaterniond(rotation[0], rotation[1], rotation[2], rotation[3]).normalized();
}

void
Scene::validate() const {
    if (sh_degree < 0 || sh_degree > kMaxShDegree) {
        throw std::invalid_argument("Scene: sh_degree must be in [0, 3]");
    }
    const size_t expected = static_cast<size_t>(sh_coeff_count(sh_degree));
    for (size_t i = 0; i < gaussians.size(); ++i) {
        if (gaussians[i].sh.size() != expected) {
            throw std::invalid_argument("Scene: gaussian " + std::to_string(i) + " has " +
                                        std::to_string(gaussians[i].sh.size()) + " SH coefficients, expected " +
                                        std::to_string(expected));
        }
    }
}

void
CameraIntrinsics::validate() const {
    if (!(fx > 0.0 && fy > 0.0) || width <= 0 || height <= 0 || !(cx >= 0.0 && cx < width) ||
        !(cy >= 0.0 && cy < height)) {
        throw std::invalid_argument("CameraIntrinsics: invalid parameters");
    }
}

Eigen::Matrix3d
covariance_of(const GaussianPrimitive &g) {
    const Eigen::Matrix3d R  = g.unit_rotation().toRotationMatrix();
    const Eigen::Vector3d s2 = (2.0 * g.log_scale).array().exp();
    Eigen::Matrix3d       S  = R * s2.asDiagonal() * R.transpose();
    return 0.5 * (S + S.transpose());
}

Eigen::Vector3d
sh_to_color(const GaussianPrimitive &g, int sh_degree, const Eigen::Vector3d &view_dir) {
    const ShBasis   basis = sh_basis(sh_degree, view_dir, false);
    Eigen::Vector3d c     = Eigen::Vector3d::Constant(0.5);
    const int       count = std::min<int>(sh_coeff_count(sh_degree), static_cast<int>(g.sh.size()));
    for (int k = 0; k < count; ++k) {
        c += basis.value[static_cast<size_t>(k)] * g.sh[static_cast<size_t>(k)];
    }
    return c.cwiseMax(0.0);
}

Eigen::Vector3d
rgb_to_sh0(const Eigen::Vector3d &rgb) {
    return (rgb - Eigen::Vector3d::Constant(0.5)) / kShC0;
}

Scene
init_scene(const std::vector<Eigen::Vector3d> &points, const SceneInitOptions &opts,
           const std::vector<Eigen::Vector3d> &colors) {
    if (points.empty()) {
        throw std::invalid_argument("init_scene: empty point list");
    }
    if (!colors.empty() && colors.size() != points.size()) {
        throw std::invalid_argument("init_scene: colors must match points");
    }
    Scene scene;
    scene.sh_degree  = opts.sh_degree;
    scene.background = opts.background;
    const size_t n   = points.size();
    const size_t ncoef = static_cast<size_t>(sh_coeff_count(opts.sh_degree));

    std::vector<double> dists;
    for (size_t i = 0; i < n; ++i) {
        // brute-force k-NN is fine at desk scale
        dists.clear();
        for (size_t j = 0; j < n; ++j) {
            if (j != i) {
                dists.push_back((points[i] - points[j]).norm());
            }
        }
        double scale = opts.default_scale;
        if (!dists.empty()) {
            const size_t k = std::min<size_t>(static_cast<size_t>(std::max(opts.neighbors, 1)), dists.size());
            std::partial_sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k), dists.end());
            double mean = 0.0;
            for (size_t m = 0; m < k; ++m) {
                mean += dists[m];
            }
            mean /= static_cast<double>(k);
            if (mean > 0.0) {
                scale = opts.scale_factor * mean;
            }
        }
        GaussianPrimitive g;
        g.position      = points[i];
        g.log_scale     = Eigen::Vector3d::Constant(std::log(scale));
        g.opacity_logit = logit(opts.initial_opacity);
        g.sh.assign(ncoef, Eigen::Vector3d::Zero());
        if (!colors.empty()) {
            g.sh[0] = rgb_to_sh0(colors[i]);
        }
        scene.gaussians.push_back(std::move(g));
    }
    return scene;
}

Scene
init_scene(int count, uint64_t rng_seed, const Bounds &bounds, const SceneInitOptions &opts) {
    if (count < 1) {
        throw std::invalid_argument("init_scene: count must be >= 1");
    }
    std::mt19937_64                        rng(rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Eigen::Vector3d>           points(static_cast<size_t>(count));
    for (auto &p : points) {
        for (int a = 0; a < 3; ++a) {
            p[a] = bounds.lo[a] + unit(rng) * (bounds.hi[a] - bounds.lo[a]);
        }
    }
    return init_scene(points, opts);
}

} // namespace evsplat
