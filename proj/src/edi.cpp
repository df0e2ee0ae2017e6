// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/edi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace evsplat {

void
EdiRequest::validate() const {
    if (!(t_start < t_end)) {
        throw std::invalid_argument("edi: need t_start < t_end");
    }
    if (!(t_ref >= t_start && t_ref <= t_end)) {
        throw std::invalid_argument("edi: t_ref " + std::to_string(t_ref) + " outside exposure [" +
                                    std::to_string(t_start) + ", " + std::to_string(t_end) + "]");
    }
    if (bins < 2) {
        throw std::invalid_argument("edi: bins must be >= 2");
    }
    if (!(theta > 0.0) || !std::isfinite(theta)) {
        throw std::invalid_argument("edi: theta must be a positive finite number");
    }
    if (blurred.empty()) {
        throw std::invalid_argument("edi: empty blurred image");
    }
    if (blurred.width() != events.width() || blurred.height() != events.height()) {
        throw std::invalid_argument("edi: event sensor " + std::to_string(events.width()) + "x" +
                                    std::to_string(events.height()) + " does not match image " +
                                    std::to_string(blurred.width()) + "x" + std::to_string(blurred.height()));
    }
    for (double v : blurred.data()) {
        if (std::isnan(v)) {
            throw std::invalid_argument("edi: NaN in blurred image");
        }
    }
}

RadianceImage
edi_deblur(const EdiRequest &req) {
    req.validate();
    const int    w = req.blurred.width(), h = req.blurred.height();
    const size_t npix = static_cast<size_t>(w) * h;
    const int    m    = req.bins;
    const double dt   = (req.t_end - req.t_start) / m;

    // Sample times: m bin centres plus t_ref, visited in time order while
    // sweeping the event list once. S(t) is the signed count of events <= t.
    struct Sample {
        double t;
        int    slot; // bin index, or m for t_ref
    };
    std::vector<Sample> samples;
    for (int k = 0; k < m; ++k) {
        samples.push_back({req.t_start + (k + 0.5) * dt, k});
    }
    samples.push_back({req.t_ref, m});
    std::stable_sort(samples.begin(), samples.end(), [](const Sample &a, const Sample &b) { return a.t < b.t; });

    std::vector<int32_t> running(npix, 0);
    std::vector<int32_t> snap(static_cast<size_t>(m + 1) * npix);
    const auto          &ev = req.events.events();
    size_t               e  = 0;
    for (const auto &s : samples) {
        for (; e < ev.size() && ev[e].t <= s.t; ++e) {
            running[static_cast<size_t>(ev[e].y) * w + ev[e].x] += ev[e].p;
        }
        std::copy(running.begin(), running.end(), snap.begin() + static_cast<ptrdiff_t>(s.slot * npix));
    }

    const int32_t *ref = snap.data() + static_cast<size_t>(m) * npix;
    RadianceImage  out(w, h, req.blurred.channels());
    const int      nc = req.blurred.channels();
    for (size_t p = 0; p < npix; ++p) {
        // mean of exp(theta * E_k); equals tau^-1 * sum exp * dt
        double sum = 0.0;
        for (int k = 0; k < m; ++k) {
            const int32_t E = snap[static_cast<size_t>(k) * npix + p] - ref[p];
            sum += E == 0 ? 1.0 : std::exp(req.theta * E);
        }
        const double mean = sum / m;
        for (int c = 0; c < nc; ++c) {
            out.data()[p * nc + c] = std::max(0.0, req.blurred.data()[p * nc + c] / mean);
        }
    }
    return out;
}

RadianceImage
edi_mid_exposure(const RadianceImage &blurred, const EventStream &events, const ExposureTrajectory &traj,
                 const EventConfig &cfg) {
    EdiRequest req;
    req.blurred = blurred;
    req.events  = events;
    req.t_start = traj.t_start;
    req.t_end   = traj.t_end;
    req.t_ref   = traj.mid_time();
    req.theta   = cfg.theta;
    req.bins    = kDefaultEdiBins;
    return edi_deblur(req);
}

} // namespace evsplat
