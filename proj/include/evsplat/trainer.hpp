// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Joint optimisation of Gaussian parameters and per-exposure endpoint poses.

#pragma once

#include "evsplat/events.hpp"
#include "evsplat/geometry.hpp"
#include "evsplat/losses.hpp"
#include "evsplat/renderer.hpp"
#include "evsplat/scene.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsplat {

struct Observation {
    RadianceImage      blurred;
    EventStream        events;
    ExposureTrajectory trajectory; ///< optimised in place
    CameraIntrinsics   intrinsics;
    RadianceImage      edi_target;

    /// Events may overshoot the window by `guard` seconds.
    void validate(double guard = 1e-9) const;
};

struct LearningRates {
    double position_init  = 1.6e-4;
    double position_final = 1.6e-6;
    double log_scale      = 5e-3;
    double rotation       = 1e-3;
    double opacity        = 5e-2;
    double sh             = 2.5e-3;
    double pose_init      = 1e-3;
    double pose_final     = 1e-5;
};

struct TrainConfig {
    int           n_latent   = 5;
    int           iterations = 20000;
    LearningRates lr;
    double        adam_beta1 = 0.9;
    double        adam_beta2 = 0.999;
    double        adam_eps   = 1e-15;
    uint64_t      seed       = 0;
    LossWeights   weights;
    /// Pose learning rates stay at zero for this many iterations.
    int pose_warmup      = 0;
    int checkpoint_every = 1000;
    int threads          = 1;

    void validate() const;

    /// Exponential interpolation from init to final over `iterations`.
    double position_lr(int iteration) const;
    double pose_lr(int iteration) const;
};

/// Flat "key = value" form; keys mirror the field names (lr_ prefixes for
/// learning rates, lambda_* / theta / log_eps for the loss weights).
std::map<std::string, std::string> config_to_map(const TrainConfig &cfg);
void                               apply_config_value(TrainConfig &cfg, const std::string &key, const std::string &value);
TrainConfig                        parse_config_text(const std::string &text, TrainConfig base = {});
TrainConfig                        load_config_file(const std::filesystem::path &path, TrainConfig base = {});
std::string                        config_to_text(const TrainConfig &cfg);

/// Number of scalars per Gaussian in the flattened optimiser layout.
int params_per_gaussian(int sh_degree);

struct PoseMoments {
    std::array<double, 12> m{}; ///< start twist then end twist
    std::array<double, 12> v{};
    int64_t                step = 0;
};

struct AdamState {
    std::vector<double>      m;
    std::vector<double>      v;
    int64_t                  step = 0;
    std::vector<PoseMoments> poses;

    void resize(const Scene &scene, size_t observations);
    bool all_finite() const;
};

struct TrainState {
    Scene                    scene;
    std::vector<Observation> observations;
    AdamState                adam;
    std::mt19937_64          rng;
    int                      iteration = 0;
    std::vector<int>         order;  ///< current epoch's visiting order
    size_t                   cursor = 0;

    TrainState() = default;
    TrainState(Scene scene, std::vector<Observation> observations, uint64_t seed);
};

/// Thrown when a step produces a non-finite loss or gradient.
class TrainingDiverged : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// One optimisation step on the next observation of the shuffled round-robin.
LossReport train_step(TrainState &state, const TrainConfig &cfg);

struct TrainRunOptions {
    /// Log, checkpoints and crash dumps go here; empty disables all file output.
    std::filesystem::path output_dir;
    std::function<void(int iteration, const LossReport &)> on_step;
};

/// Runs until state.iteration == cfg.iterations. Writes train_log.jsonl and
/// checkpoints/iter_XXXXXXXX every cfg.checkpoint_every steps and at the end.
std::vector<LossReport> train(TrainState &state, const TrainConfig &cfg, const TrainRunOptions &opts = {});

std::string log_line(int iteration, const LossReport &r);

void save_checkpoint(const std::filesystem::path &dir, const TrainState &state, const TrainConfig &cfg);
/// Restores scene, trajectories, optimiser, RNG and epoch position into a
/// state whose observations were loaded from the same dataset.
void load_checkpoint(const std::filesystem::path &dir, TrainState &state);
/// Latest iter_* directory under output_dir/checkpoints, or empty.
std::filesystem::path latest_checkpoint(const std::filesystem::path &output_dir);

struct EvalView {
    Pose          pose;
    RadianceImage image;
};

struct EvalReport {
    std::vector<double> psnr;
    std::vector<double> ssim;
    double              mean_psnr = 0.0;
    double              mean_ssim = 0.0;
};

EvalReport evaluate(const Scene &scene, const std::vector<EvalView> &views, const CameraIntrinsics &K,
                    const RenderOptions &opts = {});

struct PoseError {
    double rotation_deg  = 0.0;
    double translation_m = 0.0; ///< camera-centre distance
};

/// Averaged over the start and end poses.
PoseError pose_error(const ExposureTrajectory &est, const ExposureTrajectory &gt);

} // namespace evsplat
