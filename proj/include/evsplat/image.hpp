// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsplat {

/// Row-major, channel-interleaved image of linear radiance.
class RadianceImage {
  public:
    RadianceImage() = default;
    RadianceImage(int width, int height, int channels, double fill = 0.0)
        : width_(width), height_(height), channels_(channels) {
        if (width <= 0 || height <= 0 || (channels != 1 && channels != 3)) {
            throw std::invalid_argument("RadianceImage: bad shape " + std::to_string(width) + "x" +
                                        std::to_string(height) + "x" + std::to_string(channels));
        }
        data_.assign(static_cast<size_t>(width) * height * channels, fill);
    }

    int
    width() const {
        return width_;
    }
    int
    height() const {
        return height_;
    }
    int
    channels() const {
        return channels_;
    }
    size_t
    size() const {
        return data_.size();
    }
    bool
    empty() const {
        return data_.empty();
    }

    double &
    at(int x, int y, int c = 0) {
        return data_[index(x, y, c)];
    }
    double
    at(int x, int y, int c = 0) const {
        return data_[index(x, y, c)];
    }

    size_t
    index(int x, int y, int c = 0) const {
        return (static_cast<size_t>(y) * width_ + x) * channels_ + c;
    }

    std::span<double>
    data() {
        return data_;
    }
    std::span<const double>
    data() const {
        return data_;
    }

    bool
    same_shape(const RadianceImage &o) const {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

    friend bool
    operator==(const RadianceImage &a, const RadianceImage &b) {
        return a.same_shape(b) && a.data_ == b.data_;
    }

  private:
    int                 width_    = 0;
    int                 height_   = 0;
    int                 channels_ = 0;
    std::vector<double> data_;
};

inline void
require_same_shape(const RadianceImage &a, const RadianceImage &b, const char *what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": image shape mismatch (" + std::to_string(a.width()) + "x" +
                                    std::to_string(a.height()) + "x" + std::to_string(a.channels()) + " vs " +
                                    std::to_string(b.width()) + "x" + std::to_string(b.height()) + "x" +
                                    std::to_string(b.channels()) + ")");
    }
}

} // namespace evsplat
