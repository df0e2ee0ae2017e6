// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "evsplat/image.hpp"

#include <filesystem>

namespace evsplat {

/// Little-endian 32-bit float PFM ("PF" for RGB, "Pf" for gray), linear and
/// unclamped. Values are rounded to float on write.
void          write_pfm(const std::filesystem::path &path, const RadianceImage &img);
RadianceImage read_pfm(const std::filesystem::path &path);

/// 8-bit PNG; linear radiance is clamped to [0,1] and encoded with gamma 1/2.2.
void          write_png(const std::filesystem::path &path, const RadianceImage &img);
/// Inverse of write_png up to 8-bit quantization.
RadianceImage read_png(const std::filesystem::path &path);

/// Dispatches on extension (.pfm or .png).
RadianceImage read_image(const std::filesystem::path &path);
void          write_image(const std::filesystem::path &path, const RadianceImage &img);

} // namespace evsplat
