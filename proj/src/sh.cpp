// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/sh.hpp"

#include <stdexcept>

namespace evsplat {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277,  -0.5900435899266435};

} // namespace

ShBasis
sh_basis(int degree, const Eigen::Vector3d &dir, bool with_grad) {
    if (degree < 0 || degree > kMaxShDegree) {
        throw std::invalid_argument("sh_basis: degree must be in [0, 3]");
    }
    ShBasis     b;
    auto       &v = b.value;
    auto       &g = b.grad;
    const double x = dir.x(), y = dir.y(), z = dir.z();
    for (auto &gk : g) {
        gk.setZero();
    }

    v[0] = kShC0;
    if (degree < 1) {
        return b;
    }
    v[1] = -kC1 * y;
    v[2] = kC1 * z;
    v[3] = -kC1 * x;
    if (with_grad) {
        g[1] = {0.0, -kC1, 0.0};
        g[2] = {0.0, 0.0, kC1};
        g[3] = {-kC1, 0.0, 0.0};
    }
    if (degree < 2) {
        return b;
    }
    const double xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, yz = y * z, xz = x * z;
    v[4] = kC2[0] * xy;
    v[5] = kC2[1] * yz;
    v[6] = kC2[2] * (2.0 * zz - xx - yy);
    v[7] = kC2[3] * xz;
    v[8] = kC2[4] * (xx - yy);
    if (with_grad) {
        g[4] = kC2[0] * Eigen::Vector3d(y, x, 0.0);
        g[5] = kC2[1] * Eigen::Vector3d(0.0, z, y);
        g[6] = kC2[2] * Eigen::Vector3d(-2.0 * x, -2.0 * y, 4.0 * z);
        g[7] = kC2[3] * Eigen::Vector3d(z, 0.0, x);
        g[8] = kC2[4] * Eigen::Vector3d(2.0 * x, -2.0 * y, 0.0);
    }
    if (degree < 3) {
        return b;
    }
    v[9]  = kC3[0] * y * (3.0 * xx - yy);
    v[10] = kC3[1] * xy * z;
    v[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    v[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    v[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    v[14] = kC3[5] * z * (xx - yy);
    v[15] = kC3[6] * x * (xx - 3.0 * yy);
    if (with_grad) {
        g[9]  = kC3[0] * Eigen::Vector3d(6.0 * xy, 3.0 * xx - 3.0 * yy, 0.0);
        g[10] = kC3[1] * Eigen::Vector3d(yz, xz, xy);
        g[11] = kC3[2] * Eigen::Vector3d(-2.0 * xy, 4.0 * zz - xx - 3.0 * yy, 8.0 * yz);
        g[12] = kC3[3] * Eigen::Vector3d(-6.0 * xz, -6.0 * yz, 6.0 * zz - 3.0 * xx - 3.0 * yy);
        g[13] = kC3[4] * Eigen::Vector3d(4.0 * zz - 3.0 * xx - yy, -2.0 * xy, 8.0 * xz);
        g[14] = kC3[5] * Eigen::Vector3d(2.0 * xz, -2.0 * yz, xx - yy);
        g[15] = kC3[6] * Eigen::Vector3d(3.0 * xx - 3.0 * yy, -6.0 * xy, 0.0);
    }
    return b;
}

} // namespace evsplat
