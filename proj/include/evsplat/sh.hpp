// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <array>

namespace evsplat {

inline constexpr double kShC0         = 0.28209479177387814;
inline constexpr int    kMaxShDegree  = 3;
inline constexpr int    kMaxShCoeffs  = 16;

constexpr int
sh_coeff_count(int degree) {
    return (degree + 1) * (degree + 1);
}

/// Real SH basis values (3D-GS sign convention) for a unit direction.
struct ShBasis {
    std::array<double, kMaxShCoeffs>          value{};
    std::array<Eigen::Vector3d, kMaxShCoeffs> grad{}; ///< d value / d dir
};

ShBasis sh_basis(int degree, const Eigen::Vector3d &dir, bool with_grad);

} // namespace evsplat
