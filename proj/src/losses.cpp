// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace evsplat {

namespace {

double
sign(double v) {
    return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
}

} // namespace

void
LossWeights::validate() const {
    for (double v : {lambda_blur, lambda_ev, lambda_edi, lambda_ssim}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
        }
    }
    if (lambda_ssim > 1.0) {
        throw std::invalid_argument("LossWeights: lambda_ssim must be <= 1");
    }
    if (!(theta > 0.0) || !(log_eps > 0.0)) {
        throw std::invalid_argument("LossWeights: theta and log_eps must be > 0");
    }
}

double
l1(const RadianceImage &a, const RadianceImage &b) {
    require_same_shape(a, b, "l1");
    double sum = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        sum += std::abs(a.data()[i] - b.data()[i]);
    }
    return sum / static_cast<double>(a.size());
}

TermResult
photometric_loss(const RadianceImage &rendered, const RadianceImage &target, double lambda_ssim) {
    require_same_shape(rendered, target, "photometric_loss");
    TermResult   r;
    const double inv_n = 1.0 / static_cast<double>(rendered.size());
    r.adjoint          = RadianceImage(rendered.width(), rendered.height(), rendered.channels());
    r.value            = (1.0 - lambda_ssim) * l1(rendered, target);
    for (size_t i = 0; i < rendered.size(); ++i) {
        r.adjoint.data()[i] = (1.0 - lambda_ssim) * inv_n * sign(rendered.data()[i] - target.data()[i]);
    }
    if (lambda_ssim > 0.0) {
        const auto s = ssim_with_grad(rendered, target);
        // rounding can push ssim of identical images a few ulps above 1
        r.value += lambda_ssim * std::max(0.0, 1.0 - s.value);
        for (size_t i = 0; i < rendered.size(); ++i) {
            r.adjoint.data()[i] -= lambda_ssim * s.adjoint.data()[i];
        }
    }
    return r;
}

TermResult
blur_loss(const RadianceImage &rendered_blur, const RadianceImage &observed_blur, const LossWeights &w) {
    w.validate();
    return photometric_loss(rendered_blur, observed_blur, w.lambda_ssim);
}

TermResult
edi_loss(const RadianceImage &latent_mid, const RadianceImage &edi_image, const LossWeights &w) {
    w.validate();
    return photometric_loss(latent_mid, edi_image, w.lambda_ssim);
}

std::vector<EventWindow>
sample_event_windows(int n, std::mt19937_64 &rng) {
    if (n < 2) {
        throw std::invalid_argument("event windows need at least two latent images, got " + std::to_string(n));
    }
    std::vector<EventWindow> out;
    for (int i = 0; i + 1 < n; ++i) {
        std::uniform_int_distribution<int> pick(0, i);
        out.push_back({pick(rng), i + 1});
    }
    return out;
}

EventLossResult
event_loss(const std::vector<RadianceImage> &latent_log_images, const EventStream &stream,
           const std::vector<double> &latent_times, const std::vector<EventWindow> &windows, const LossWeights &w) {
    w.validate();
    const int n = static_cast<int>(latent_log_images.size());
    if (n < 2) {
        throw std::invalid_argument("event_loss: need at least two latent images, got " + std::to_string(n));
    }
    if (latent_times.size() != latent_log_images.size()) {
        throw std::invalid_argument("event_loss: latent_times and latent images differ in length");
    }
    if (windows.empty()) {
        throw std::invalid_argument("event_loss: no windows");
    }
    const auto &first = latent_log_images.front();
    if (first.channels() != 1 || first.width() != stream.width() || first.height() != stream.height()) {
        throw std::invalid_argument("event_loss: latent log images must be single-channel and match the sensor");
    }
    for (const auto &img : latent_log_images) {
        require_same_shape(img, first, "event_loss");
    }

    EventLossResult r;
    r.windows = windows;
    r.log_adjoints.assign(latent_log_images.size(), RadianceImage(first.width(), first.height(), 1));
    const size_t npix  = first.size();
    const double scale = 1.0 / (static_cast<double>(npix) * static_cast<double>(windows.size()));
    for (const auto &win : windows) {
        if (win.start < 0 || win.end >= n || win.start >= win.end) {
            throw std::out_of_range("event_loss: bad window [" + std::to_string(win.start) + ", " +
                                    std::to_string(win.end) + "]");
        }
        const auto counts = accumulate(stream, latent_times[static_cast<size_t>(win.start)],
                                       latent_times[static_cast<size_t>(win.end)]);
        const auto  Ls    = latent_log_images[static_cast<size_t>(win.start)].data();
        const auto  Le    = latent_log_images[static_cast<size_t>(win.end)].data();
        auto        gs    = r.log_adjoints[static_cast<size_t>(win.start)].data();
        auto        ge    = r.log_adjoints[static_cast<size_t>(win.end)].data();
        for (size_t p = 0; p < npix; ++p) {
            const double diff = (Le[p] - Ls[p]) / w.theta - counts.counts[p];
            r.value += std::abs(diff) * scale;
            const double g = sign(diff) * scale / w.theta;
            ge[p] += g;
            gs[p] -= g;
        }
    }
    return r;
}

EventLossResult
event_loss(const std::vector<RadianceImage> &latent_log_images, const EventStream &stream,
           const std::vector<double> &latent_times, const LossWeights &w, std::mt19937_64 &rng) {
    const auto windows = sample_event_windows(static_cast<int>(latent_log_images.size()), rng);
    return event_loss(latent_log_images, stream, latent_times, windows, w);
}

RadianceImage
log_luminance_backward(const RadianceImage &rgb, const RadianceImage &log_adjoint, double log_eps) {
    if (log_adjoint.channels() != 1 || log_adjoint.width() != rgb.width() || log_adjoint.height() != rgb.height()) {
        throw std::invalid_argument("log_luminance_backward: adjoint shape mismatch");
    }
    RadianceImage out(rgb.width(), rgb.height(), rgb.channels());
    const int     C = rgb.channels();
    for (size_t p = 0; p < log_adjoint.size(); ++p) {
        const double *c    = rgb.data().data() + p * C;
        const double  luma = C == 3 ? kLumaR * c[0] + kLumaG * c[1] + kLumaB * c[2] : c[0];
        const double  g    = log_adjoint.data()[p] / (luma + log_eps);
        if (C == 3) {
            out.data()[p * 3 + 0] = kLumaR * g;
            out.data()[p * 3 + 1] = kLumaG * g;
            out.data()[p * 3 + 2] = kLumaB * g;
        } else {
            out.data()[p] = g;
        }
    }
    return out;
}

LossReport
total_loss(double blur, double event, double edi, const LossWeights &w) {
    w.validate();
    LossReport r;
    r.blur  = blur;
    r.event = event;
    r.edi   = edi;
    r.total = w.lambda_blur * blur + w.lambda_ev * event + w.lambda_edi * edi;
    return r;
}

LossReport
observation_loss(const BlurRender &render, const RadianceImage &observed_blur, const EventStream &events,
                 const RadianceImage &edi_target, const LossWeights &w, std::mt19937_64 &rng) {
    w.validate();
    const int n = static_cast<int>(render.latents.size());
    if (n < 1 || render.times.size() != render.latents.size()) {
        throw std::invalid_argument("observation_loss: render has no latent images");
    }
    const auto blur = blur_loss(render.blurred, observed_blur, w);
    const auto edi  = edi_loss(render.latents[static_cast<size_t>((n - 1) / 2)], edi_target, w);

    double                     ev_value = 0.0;
    std::vector<RadianceImage> ev_adjoints;
    if (n >= 2) {
        EventConfig cfg;
        cfg.theta   = w.theta;
        cfg.log_eps = w.log_eps;
        std::vector<RadianceImage> logs;
        logs.reserve(render.latents.size());
        for (const auto &img : render.latents) {
            logs.push_back(log_luminance(img, cfg));
        }
        auto ev  = event_loss(logs, events, render.times, w, rng);
        ev_value = ev.value;
        if (w.lambda_ev > 0.0) {
            for (size_t i = 0; i < logs.size(); ++i) {
                ev_adjoints.push_back(log_luminance_backward(render.latents[i], ev.log_adjoints[i], w.log_eps));
            }
        }
    } else if (w.lambda_ev > 0.0) {
        throw std::invalid_argument("observation_loss: the event term needs n >= 2 latent images");
    }

    LossReport r = total_loss(blur.value, ev_value, edi.value, w);
    r.latent_adjoints.assign(render.latents.size(), RadianceImage(observed_blur.width(), observed_blur.height(),
                                                                  observed_blur.channels()));
    const double blur_share = w.lambda_blur / n;
    for (int i = 0; i < n; ++i) {
        auto  adj = r.latent_adjoints[static_cast<size_t>(i)].data();
        for (size_t k = 0; k < adj.size(); ++k) {
            adj[k] += blur_share * blur.adjoint.data()[k];
        }
        if (!ev_adjoints.empty()) {
            for (size_t k = 0; k < adj.size(); ++k) {
                adj[k] += w.lambda_ev * ev_adjoints[static_cast<size_t>(i)].data()[k];
            }
        }
        if (i == (n - 1) / 2) {
            for (size_t k = 0; k < adj.size(); ++k) {
                adj[k] += w.lambda_edi * edi.adjoint.data()[k];
            }
        }
    }
    return r;
}

double
psnr(const RadianceImage &a, const RadianceImage &b) {
    require_same_shape(a, b, "psnr");
    double se = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = std::clamp(a.data()[i], 0.0, 1.0) - std::clamp(b.data()[i], 0.0, 1.0);
        se += d * d;
    }
    if (se == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(static_cast<double>(a.size()) / se);
}

} // namespace evsplat
