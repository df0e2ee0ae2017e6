// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/events.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace evsplat {

bool
event_less(const Event &a, const Event &b) {
    if (a.t != b.t) {
        return a.t < b.t;
    }
    if (a.y != b.y) {
        return a.y < b.y;
    }
    if (a.x != b.x) {
        return a.x < b.x;
    }
    return a.p < b.p;
}

EventStream::EventStream(int width, int height, std::vector<Event> events)
    : width_(width), height_(height), events_(std::move(events)) {
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("EventStream: sensor size must be positive");
    }
    for (const auto &e : events_) {
        if (e.x >= width || e.y >= height) {
            throw std::invalid_argument("EventStream: event at (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                                        ") outside " + std::to_string(width) + "x" + std::to_string(height) +
                                        " sensor");
        }
        if (e.p != 1 && e.p != -1) {
            throw std::invalid_argument("EventStream: polarity must be +1 or -1");
        }
        if (!std::isfinite(e.t)) {
            throw std::invalid_argument("EventStream: non-finite timestamp");
        }
    }
    std::stable_sort(events_.begin(), events_.end(), event_less);
}

void
EventConfig::validate() const {
    if (!(theta > 0.0)) {
        throw std::invalid_argument("EventConfig: theta must be > 0");
    }
    if (!(log_eps > 0.0)) {
        throw std::invalid_argument("EventConfig: log_eps must be > 0");
    }
    if (!(threshold_sigma >= 0.0)) {
        throw std::invalid_argument("EventConfig: threshold_sigma must be >= 0");
    }
}

RadianceImage
log_luminance(const RadianceImage &img, const EventConfig &cfg) {
    cfg.validate();
    RadianceImage out(img.width(), img.height(), 1);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const double luma = img.channels() == 3
                                    ? kLumaR * img.at(x, y, 0) + kLumaG * img.at(x, y, 1) + kLumaB * img.at(x, y, 2)
                                    : img.at(x, y, 0);
            out.at(x, y) = std::log(luma + cfg.log_eps);
        }
    }
    return out;
}

CountMap
accumulate(const EventStream &stream, double t_pre, double t_cur) {
    if (!(t_pre <= t_cur)) {
        throw std::invalid_argument("accumulate: reversed interval (" + std::to_string(t_pre) + ", " +
                                    std::to_string(t_cur) + "]");
    }
    CountMap out{stream.width(), stream.height(),
                 std::vector<int32_t>(static_cast<size_t>(stream.width()) * stream.height(), 0)};
    const auto &ev    = stream.events();
    const auto  first = std::upper_bound(ev.begin(), ev.end(), t_pre, [](double t, const Event &e) { return t < e.t; });
    const auto  last  = std::upper_bound(first, ev.end(), t_cur, [](double t, const Event &e) { return t < e.t; });
    for (auto it = first; it != last; ++it) {
        out.counts[static_cast<size_t>(it->y) * out.width + it->x] += it->p;
    }
    return out;
}

EventStream
simulate_events(const std::vector<TimedFrame> &frames, const EventConfig &cfg) {
    cfg.validate();
    if (frames.size() < 2) {
        throw std::invalid_argument("simulate_events: need at least two frames");
    }
    const int w = frames.front().log_image.width();
    const int h = frames.front().log_image.height();
    for (size_t k = 0; k < frames.size(); ++k) {
        const auto &f = frames[k];
        if (f.log_image.width() != w || f.log_image.height() != h || f.log_image.channels() != 1) {
            throw std::invalid_argument("simulate_events: frame " + std::to_string(k) +
                                        " has mismatched dimensions or is not single-channel");
        }
        if (k > 0 && !(f.t > frames[k - 1].t)) {
            throw std::invalid_argument("simulate_events: frame times must be strictly increasing");
        }
    }

    std::vector<double> threshold(static_cast<size_t>(w) * h, cfg.theta);
    if (cfg.threshold_sigma > 0.0) {
        std::mt19937_64                  rng(cfg.noise_seed);
        std::normal_distribution<double> n01(0.0, 1.0);
        for (double &th : threshold) {
            th = cfg.theta * std::max(0.1, 1.0 + cfg.threshold_sigma * n01(rng));
        }
    }

    std::vector<Event> events;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double th    = threshold[static_cast<size_t>(y) * w + x];
            double       L_ref = frames.front().log_image.at(x, y);
            for (size_t k = 1; k < frames.size(); ++k) {
                const double L0   = frames[k - 1].log_image.at(x, y);
                const double L1   = frames[k].log_image.at(x, y);
                const double diff = L1 - L_ref;
                // tolerance keeps exact multiples of theta from losing an event to rounding
                const int count = static_cast<int>(std::floor(std::abs(diff) / th + 1e-9));
                if (count == 0) {
                    continue;
                }
                const double sign = diff > 0.0 ? 1.0 : -1.0;
                const double t0 = frames[k - 1].t, t1 = frames[k].t;
                for (int j = 1; j <= count; ++j) {
                    const double level = L_ref + sign * th * j;
                    double       frac  = L1 != L0 ? (level - L0) / (L1 - L0) : 1.0;
                    frac               = std::clamp(frac, 0.0, 1.0);
                    events.push_back({t0 + frac * (t1 - t0), static_cast<uint16_t>(x), static_cast<uint16_t>(y),
                                      static_cast<int8_t>(sign)});
                }
                L_ref += sign * th * count;
            }
        }
    }
    return EventStream(w, h, std::move(events));
}

RadianceImage
predicted_event_map(const std::vector<RadianceImage> &latent_log_images, int i_start, int i_end,
                    const EventConfig &cfg) {
    cfg.validate();
    const int n = static_cast<int>(latent_log_images.size());
    if (i_start < 0 || i_end >= n || !(i_start < i_end)) {
        throw std::out_of_range("predicted_event_map: need 0 <= i_start < i_end < " + std::to_string(n));
    }
    const auto &a = latent_log_images[static_cast<size_t>(i_start)];
    const auto &b = latent_log_images[static_cast<size_t>(i_end)];
    require_same_shape(a, b, "predicted_event_map");
    RadianceImage out(a.width(), a.height(), a.channels());
    for (size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = (b.data()[i] - a.data()[i]) / cfg.theta;
    }
    return out;
}

} // namespace evsplat
