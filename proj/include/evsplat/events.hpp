// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Event streams, polarity accumulation and an ideal (noise-free by default)
// contrast-threshold event simulator. Events carry luminance semantics: RGB
// radiance is reduced with Rec.709 weights before taking the log.

#pragma once

#include "evsplat/image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace evsplat {

struct Event {
    double   t = 0.0; ///< seconds
    uint16_t x = 0;   ///< column
    uint16_t y = 0;   ///< row
    int8_t   p = 1;   ///< +1 or -1

    friend bool operator==(const Event &, const Event &) = default;
};

/// Strict weak order used for streams: by time, then row, column, polarity.
bool event_less(const Event &a, const Event &b);

class EventStream {
  public:
    EventStream() = default;
    EventStream(int width, int height) : width_(width), height_(height) {}
    /// Validates bounds and polarities, then sorts.
    EventStream(int width, int height, std::vector<Event> events);

    int
    width() const {
        return width_;
    }
    int
    height() const {
        return height_;
    }
    const std::vector<Event> &
    events() const {
        return events_;
    }
    size_t
    size() const {
        return events_.size();
    }
    bool
    empty() const {
        return events_.empty();
    }

    friend bool operator==(const EventStream &, const EventStream &) = default;

  private:
    int                width_  = 0;
    int                height_ = 0;
    std::vector<Event> events_;
};

struct EventConfig {
    double theta   = 0.2;  ///< contrast threshold, log-radiance units
    double log_eps = 1e-3; ///< offset inside the logarithm
    /// Relative per-pixel threshold jitter; 0 disables noise.
    double   threshold_sigma = 0.0;
    uint64_t noise_seed      = 0;

    void validate() const;
};

inline constexpr double kLumaR = 0.2126;
inline constexpr double kLumaG = 0.7152;
inline constexpr double kLumaB = 0.0722;

/// Single-channel ln(luma + log_eps).
RadianceImage log_luminance(const RadianceImage &img, const EventConfig &cfg);

/// Signed per-pixel event counts, row-major.
struct CountMap {
    int                  width  = 0;
    int                  height = 0;
    std::vector<int32_t> counts;

    int32_t
    at(int x, int y) const {
        return counts[static_cast<size_t>(y) * width + x];
    }
};

/// Sum of polarities of events with t in (t_pre, t_cur].
CountMap accumulate(const EventStream &stream, double t_pre, double t_cur);

struct TimedFrame {
    double        t = 0.0;
    RadianceImage log_image; ///< single channel, log domain
};

/// Per-pixel reference-level simulator with linearly interpolated crossing
/// times between consecutive frames.
EventStream simulate_events(const std::vector<TimedFrame> &frames, const EventConfig &cfg);

/// (L[i_end] - L[i_start]) / theta as a single-channel real map.
RadianceImage predicted_event_map(const std::vector<RadianceImage> &latent_log_images, int i_start, int i_end,
                                  const EventConfig &cfg);

// Binary format: "EVT1", u32 width, u32 height, u64 count, then count
// records of (f64 t, u16 x, u16 y, i8 p, 7 pad bytes), little-endian.
void        write_events_binary(const std::filesystem::path &path, const EventStream &stream);
EventStream read_events_binary(const std::filesystem::path &path);

// CSV with header "t,x,y,p". Sensor size is not stored and must be supplied.
void        write_events_csv(const std::filesystem::path &path, const EventStream &stream);
EventStream read_events_csv(const std::filesystem::path &path, int width, int height);

} // namespace evsplat
