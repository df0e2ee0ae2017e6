// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace evsplat {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "PFM I/O assumes a little-endian host");

void
write_pfm(const fs::path &path, const RadianceImage &img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_pfm: cannot open " + path.string());
    }
    out << (img.channels() == 3 ? "PF" : "Pf") << '\n'
        << img.width() << ' ' << img.height() << '\n'
        << "-1.0\n";
    std::vector<float> row(static_cast<size_t>(img.width()) * img.channels());
    // PFM scanlines run bottom to top.
    for (int y = img.height() - 1; y >= 0; --y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                row[static_cast<size_t>(x) * img.channels() + c] = static_cast<float>(img.at(x, y, c));
            }
        }
        out.write(reinterpret_cast<const char *>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) {
        throw std::runtime_error("write_pfm: write failed for " + path.string());
    }
}

RadianceImage
read_pfm(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("read_pfm: cannot open " + path.string());
    }
    std::string magic;
    int         w = 0, h = 0;
    double      scale = 0.0;
    in >> magic >> w >> h >> scale;
    in.get(); // single whitespace byte before the raster
    if (!in || (magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || scale == 0.0) {
        throw std::runtime_error("read_pfm: malformed header in " + path.string());
    }
    if (scale > 0.0) {
        throw std::runtime_error("read_pfm: big-endian PFM not supported: " + path.string());
    }
    const int          channels = magic == "PF" ? 3 : 1;
    RadianceImage      img(w, h, channels);
    std::vector<float> row(static_cast<size_t>(w) * channels);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char *>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) {
            throw std::runtime_error("read_pfm: truncated raster in " + path.string());
        }
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                img.at(x, y, c) = row[static_cast<size_t>(x) * channels + c];
            }
        }
    }
    return img;
}

void
write_png(const fs::path &path, const RadianceImage &img) {
    png_image desc;
    std::memset(&desc, 0, sizeof(desc));
    desc.version = PNG_IMAGE_VERSION;
    desc.width   = static_cast<png_uint_32>(img.width());
    desc.height  = static_cast<png_uint_32>(img.height());
    desc.format  = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    std::vector<uint8_t> bytes(img.size());
    const auto           src = img.data();
    for (size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::clamp(src[i], 0.0, 1.0);
        bytes[i]       = static_cast<uint8_t>(std::lround(std::pow(v, 1.0 / 2.2) * 255.0));
    }
    if (!png_image_write_to_file(&desc, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
        throw std::runtime_error("write_png: " + path.string() + ": " + desc.message);
    }
}

RadianceImage
read_png(const fs::path &path) {
    png_image desc;
    std::memset(&desc, 0, sizeof(desc));
    desc.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&desc, path.string().c_str())) {
        throw std::runtime_error("read_png: " + path.string() + ": " + desc.message);
    }
    const bool gray = (desc.format & PNG_FORMAT_FLAG_COLOR) == 0;
    desc.format     = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<uint8_t> bytes(PNG_IMAGE_SIZE(desc));
    if (!png_image_finish_read(&desc, nullptr, bytes.data(), 0, nullptr)) {
        throw std::runtime_error("read_png: " + path.string() + ": " + desc.message);
    }
    RadianceImage img(static_cast<int>(desc.width), static_cast<int>(desc.height), gray ? 1 : 3);
    auto          dst = img.data();
    for (size_t i = 0; i < dst.size(); ++i) {
        dst[i] = std::pow(bytes[i] / 255.0, 2.2);
    }
    return img;
}

RadianceImage
read_image(const fs::path &path) {
    const auto ext = path.extension().string();
    if (ext == ".pfm") {
        return read_pfm(path);
    }
    if (ext == ".png") {
        return read_png(path);
    }
    throw std::invalid_argument("read_image: unsupported extension '" + ext + "' for " + path.string());
}

void
write_image(const fs::path &path, const RadianceImage &img) {
    const auto ext = path.extension().string();
    if (ext == ".pfm") {
        write_pfm(path, img);
    } else if (ext == ".png") {
        write_png(path, img);
    } else {
        throw std::invalid_argument("write_image: unsupported extension '" + ext + "' for " + path.string());
    }
}

} // namespace evsplat
