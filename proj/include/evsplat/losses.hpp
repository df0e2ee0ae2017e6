// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Supervision terms and metrics. Every differentiable term returns its value
// together with the adjoint image(s) with respect to the rendered input.

#pragma once

#include "evsplat/events.hpp"
#include "evsplat/image.hpp"
#include "evsplat/renderer.hpp"

#include <random>
#include <vector>

namespace evsplat {

struct LossWeights {
    double lambda_blur = 1.0;
    double lambda_ev   = 0.1;
    double lambda_edi  = 1.0;
    double lambda_ssim = 0.2;
    double theta       = 0.2;
    double log_eps     = 1e-3; ///< offset inside the log luminance used by the event term

    void validate() const;
};

struct TermResult {
    double        value = 0.0;
    RadianceImage adjoint; ///< d value / d rendered
};

/// Mean absolute difference over pixels and channels.
double l1(const RadianceImage &a, const RadianceImage &b);

inline constexpr int    kSsimWindow = 11;
inline constexpr double kSsimSigma  = 1.5;
inline constexpr double kSsimK1     = 0.01;
inline constexpr double kSsimK2     = 0.03;

/// Gaussian-window SSIM over the valid region, averaged over channels.
double ssim(const RadianceImage &a, const RadianceImage &b);

/// SSIM value and its gradient with respect to `a`.
TermResult ssim_with_grad(const RadianceImage &a, const RadianceImage &b);

/// (1 - lambda_ssim) * l1 + lambda_ssim * (1 - ssim), differentiated in `rendered`.
TermResult photometric_loss(const RadianceImage &rendered, const RadianceImage &target, double lambda_ssim);

TermResult blur_loss(const RadianceImage &rendered_blur, const RadianceImage &observed_blur, const LossWeights &w);
TermResult edi_loss(const RadianceImage &latent_mid, const RadianceImage &edi_image, const LossWeights &w);

struct EventWindow {
    int start = 0; ///< latent index of t_s
    int end   = 1; ///< latent index i + 1
};

/// One window per i in 0..n-2, start index drawn uniformly from {0..i}.
std::vector<EventWindow> sample_event_windows(int n, std::mt19937_64 &rng);

struct EventLossResult {
    double                     value = 0.0;
    std::vector<RadianceImage> log_adjoints; ///< one per latent log image
    std::vector<EventWindow>   windows;
};

/// Mean over pixels and windows of |E - (L_end - L_start) / theta|.
EventLossResult event_loss(const std::vector<RadianceImage> &latent_log_images, const EventStream &stream,
                           const std::vector<double> &latent_times, const std::vector<EventWindow> &windows,
                           const LossWeights &w);
EventLossResult event_loss(const std::vector<RadianceImage> &latent_log_images, const EventStream &stream,
                           const std::vector<double> &latent_times, const LossWeights &w, std::mt19937_64 &rng);

/// Chains an adjoint on ln(luma + eps) back to the colour image.
RadianceImage log_luminance_backward(const RadianceImage &rgb, const RadianceImage &log_adjoint, double log_eps);

struct LossReport {
    double total = 0.0;
    double blur  = 0.0;
    double event = 0.0;
    double edi   = 0.0;
    /// Weighted adjoint of `total` with respect to each latent render.
    std::vector<RadianceImage> latent_adjoints;
};

LossReport total_loss(double blur, double event, double edi, const LossWeights &w);

/// All three terms for one observation, with adjoints pushed back to the
/// latent renders. Terms with zero weight are still evaluated for logging.
LossReport observation_loss(const BlurRender &render, const RadianceImage &observed_blur, const EventStream &events,
                            const RadianceImage &edi_target, const LossWeights &w, std::mt19937_64 &rng);

/// Peak-1 PSNR on inputs clamped to [0, 1]; +infinity for identical images.
double psnr(const RadianceImage &a, const RadianceImage &b);

} // namespace evsplat
