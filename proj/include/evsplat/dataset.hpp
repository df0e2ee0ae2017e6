// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic dataset generation and loading.
//
// Layout under the dataset root:
//   manifest.json
//   views/blur_####.pfm, views/blur_####.png   blurred observations
//   events/view_####.evt                       one event stream per observation
//   gt/sharp_####.pfm                          mid-exposure sharp frames
//   gt/eval_####.pfm                           eval-view ground truth
//   gt/trajectories.json, gt/scene.json        ground truth (synthetic only)
//   init/scene.json                            initial scene for training
//   frames/view_####/frame_####.pfm            dense frames (optional)

#pragma once

#include "evsplat/geometry.hpp"
#include "evsplat/json_io.hpp"
#include "evsplat/scene.hpp"
#include "evsplat/trainer.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace evsplat {

inline constexpr int kManifestVersion = 1;
inline constexpr int kMinDenseFrames  = 51;

struct SynthConfig {
    uint64_t seed       = 7;
    int      width      = 64;
    int      height     = 64;
    double   focal      = 64.0;
    int      gaussians  = 200;
    int      views      = 10;
    int      eval_views = 4;
    int      sh_degree  = 1;
    /// Ground-truth primitives live in [-extent/2, extent/2]^3.
    double          extent          = 2.0;
    double          camera_distance = 3.5;
    double          max_elevation_deg = 30.0;
    Eigen::Vector3d background        = Eigen::Vector3d::Constant(0.25);
    /// Relative motion between exposure start and end.
    double shake_rotation_deg = 2.0;
    double shake_translation  = 0.02; ///< fraction of extent
    double exposure           = 0.04; ///< seconds
    double view_spacing       = 0.1;  ///< seconds between exposure starts
    int    dense_frames       = 101;
    /// The event sensor runs along the extrapolated trajectory for this many
    /// exposure lengths before the shutter opens, so per-pixel reference
    /// levels do not start out aligned with the first exposure frame.
    /// Events before the exposure are discarded.
    double event_lead_in = 1.0;
    double theta              = 0.2;
    double log_eps            = 1e-3;
    int    n_latent           = 5; ///< recorded for reference only
    /// Perturbation of the trajectories handed to the trainer.
    double init_rotation_deg   = 1.0;
    double init_translation    = 0.01; ///< fraction of extent
    double init_position_noise = 0.05; ///< metres, per axis
    bool   store_frames        = false;
    /// Optional ground-truth scene file instead of random primitives.
    std::filesystem::path scene_path;

    void validate() const;
};

/// Writes a complete dataset to `out` and returns the manifest.
Json synth_dataset(const SynthConfig &cfg, const std::filesystem::path &out);

/// Camera at `center` looking at `target`, image y pointing away from `up`.
Pose look_at(const Eigen::Vector3d &center, const Eigen::Vector3d &target, const Eigen::Vector3d &up);

struct Dataset {
    std::filesystem::path    root;
    CameraIntrinsics         intrinsics;
    double                   theta   = 0.2;
    double                   log_eps = 1e-3;
    std::vector<Observation> observations; ///< EDI targets cached
    std::vector<EvalView>    eval_views;
    Scene                    init_scene;
    // present for synthetic datasets
    std::optional<Scene>            gt_scene;
    std::vector<ExposureTrajectory> gt_trajectories;
    std::vector<RadianceImage>      gt_sharp;
    Json                            manifest;
};

struct LoadOptions {
    /// Overrides the manifest threshold for the EDI targets when set.
    std::optional<double> theta;
    bool                  load_ground_truth = true;
};

Dataset load_dataset(const std::filesystem::path &root, const LoadOptions &opts = {});

struct ViewStats {
    size_t events          = 0;
    size_t positive_events = 0;
    double blur_l1         = -1.0; ///< mean |blurred - sharp|, -1 without ground truth
    double rotation_deg    = 0.0;  ///< start-to-end rotation of the trajectory
    double translation_m   = 0.0;  ///< start-to-end camera-centre displacement
};

std::vector<ViewStats> inspect_dataset(const Dataset &ds);

} // namespace evsplat
