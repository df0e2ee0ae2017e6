// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/renderer.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace evsplat {

namespace {

constexpr int kBandRows = 8;

struct ProjectionDetail {
    bool            visible = false;
    Projected2D     p;
    Eigen::Matrix3d Rc;      // camera rotation
    Eigen::Vector3d xc;      // camera-space mean
    Eigen::Matrix3d Rg;      // primitive rotation
    Eigen::Vector3d s2;      // squared scales
    Eigen::Matrix3d sigma_c; // camera-space covariance
    Eigen::Matrix<double, 2, 3> J;
    Eigen::Vector3d dir;      // unit camera->gaussian direction (world)
    double          dist = 0; // |mu - camera centre|
    std::array<bool, 3> clamped{};
    ShBasis         basis;
};

ProjectionDetail
project_detail(const GaussianPrimitive &g, int sh_degree, const Pose &pose, const CameraIntrinsics &K,
               const RenderOptions &opts, bool with_grad) {
    ProjectionDetail d;
    d.Rc = pose.R();
    d.xc = d.Rc * g.position + pose.translation;
    const double z = d.xc.z();
    if (!(z > opts.near_plane)) {
        return d;
    }
    const double alpha = g.opacity();
    if (!(alpha >= opts.alpha_min)) {
        return d;
    }
    d.Rg = g.unit_rotation().toRotationMatrix();
    d.s2 = (2.0 * g.log_scale).array().exp();
    const Eigen::Matrix3d sigma = d.Rg * d.s2.asDiagonal() * d.Rg.transpose();
    d.sigma_c                   = d.Rc * sigma * d.Rc.transpose();

    const double x = d.xc.x(), y = d.xc.y();
    d.J << K.fx / z, 0.0, -K.fx * x / (z * z), 0.0, K.fy / z, -K.fy * y / (z * z);

    Projected2D &p = d.p;
    p.cov2d        = d.J * d.sigma_c * d.J.transpose();
    p.cov2d(0, 1) = p.cov2d(1, 0) = 0.5 * (p.cov2d(0, 1) + p.cov2d(1, 0));
    p.cov2d(0, 0) += opts.low_pass;
    p.cov2d(1, 1) += opts.low_pass;
    const double det = p.cov2d.determinant();
    if (!(det > 0.0)) {
        return d;
    }
    p.conic << p.cov2d(1, 1) / det, -p.cov2d(0, 1) / det, -p.cov2d(1, 0) / det, p.cov2d(0, 0) / det;
    p.mean2d = {K.fx * x / z + K.cx, K.fy * y / z + K.cy};
    p.depth  = z;
    p.alpha  = alpha;

    // alpha * exp(-m^2 / 2) >= alpha_min  <=>  m^2 <= 2 ln(alpha / alpha_min)
    p.x0 = 0;
    p.x1 = K.width - 1;
    p.y0 = 0;
    p.y1 = K.height - 1;
    if (opts.alpha_min > 0.0) {
        const double m2 = 2.0 * std::log(alpha / opts.alpha_min);
        const double hx = std::sqrt(m2 * p.cov2d(0, 0));
        const double hy = std::sqrt(m2 * p.cov2d(1, 1));
        p.x0 = static_cast<int>(std::clamp(std::ceil(p.mean2d.x() - hx), 0.0, static_cast<double>(K.width)));
        p.x1 = static_cast<int>(std::clamp(std::floor(p.mean2d.x() + hx), -1.0, static_cast<double>(K.width - 1)));
        p.y0 = static_cast<int>(std::clamp(std::ceil(p.mean2d.y() - hy), 0.0, static_cast<double>(K.height)));
        p.y1 = static_cast<int>(std::clamp(std::floor(p.mean2d.y() + hy), -1.0, static_cast<double>(K.height - 1)));
    }
    if (p.x0 > p.x1 || p.y0 > p.y1) {
        return d;
    }

    const Eigen::Vector3d offset = g.position - pose.center();
    d.dist                       = offset.norm();
    d.dir                        = offset / d.dist;
    d.basis                      = sh_basis(sh_degree, d.dir, with_grad);
    Eigen::Vector3d c            = Eigen::Vector3d::Constant(0.5);
    const int       ncoef        = sh_coeff_count(sh_degree);
    for (int k = 0; k < ncoef; ++k) {
        c += d.basis.value[static_cast<size_t>(k)] * g.sh[static_cast<size_t>(k)];
    }
    for (int ch = 0; ch < 3; ++ch) {
        d.clamped[static_cast<size_t>(ch)] = c[ch] < 0.0;
    }
    p.color   = c.cwiseMax(0.0);
    d.visible = true;
    return d;
}

struct Frame {
    std::vector<ProjectionDetail> proj;
    std::vector<int>              order; // visible gaussians sorted front to back
};

Frame
prepare(const Scene &scene, const Pose &pose, const CameraIntrinsics &K, const RenderOptions &opts, bool with_grad) {
    if (scene.gaussians.empty()) {
        throw std::invalid_argument("render: scene has no gaussians");
    }
    scene.validate();
    Frame f;
    f.proj.reserve(scene.size());
    for (const auto &g : scene.gaussians) {
        f.proj.push_back(project_detail(g, scene.sh_degree, pose, K, opts, with_grad));
    }
    for (int i = 0; i < static_cast<int>(scene.size()); ++i) {
        if (f.proj[static_cast<size_t>(i)].visible) {
            f.order.push_back(i);
        }
    }
    // Ties broken by index; sort order is treated as locally constant.
    std::stable_sort(f.order.begin(), f.order.end(), [&](int a, int b) {
        return f.proj[static_cast<size_t>(a)].p.depth < f.proj[static_cast<size_t>(b)].p.depth;
    });
    return f;
}

struct PixelWeight {
    double a;     // composited alpha at the pixel
    double G;     // Gaussian falloff
    bool   capped;
};

inline bool
pixel_weight(const Projected2D &p, int x, int y, const RenderOptions &opts, PixelWeight &w) {
    const double dx    = x - p.mean2d.x();
    const double dy    = y - p.mean2d.y();
    const double power = -0.5 * (p.conic(0, 0) * dx * dx + 2.0 * p.conic(0, 1) * dx * dy + p.conic(1, 1) * dy * dy);
    w.G                = std::exp(power);
    const double a     = p.alpha * w.G;
    w.capped           = a > opts.alpha_cap;
    w.a                = w.capped ? opts.alpha_cap : a;
    return w.a >= opts.alpha_min;
}

int
band_count(int height) {
    return (height + kBandRows - 1) / kBandRows;
}

} // namespace

std::optional<Projected2D>
project_gaussian(const GaussianPrimitive &g, int sh_degree, const Pose &pose, const CameraIntrinsics &K,
                 const RenderOptions &opts) {
    auto d = project_detail(g, sh_degree, pose, K, opts, false);
    if (!d.visible) {
        return std::nullopt;
    }
    return d.p;
}

RenderResult
render_full(const Scene &scene, const Pose &pose, const CameraIntrinsics &K, const RenderOptions &opts) {
    K.validate();
    const Frame  f = prepare(scene, pose, K, opts, false);
    RenderResult out;
    out.image = RadianceImage(K.width, K.height, 3);
    out.final_transmittance.assign(static_cast<size_t>(K.width) * K.height, 1.0);
    auto img = out.image.data();

    detail::parallel_for(band_count(K.height), opts.threads, [&](int band) {
        const int y_lo = band * kBandRows;
        const int y_hi = std::min(K.height, y_lo + kBandRows);
        for (int idx : f.order) {
            const Projected2D &p = f.proj[static_cast<size_t>(idx)].p;
            if (p.y1 < y_lo || p.y0 >= y_hi) {
                continue;
            }
            for (int y = std::max(p.y0, y_lo); y <= std::min(p.y1, y_hi - 1); ++y) {
                for (int x = p.x0; x <= p.x1; ++x) {
                    PixelWeight w;
                    if (!pixel_weight(p, x, y, opts, w)) {
                        continue;
                    }
                    double      &T   = out.final_transmittance[static_cast<size_t>(y) * K.width + x];
                    const size_t pix = out.image.index(x, y);
                    for (int c = 0; c < 3; ++c) {
                        img[pix + c] += T * w.a * p.color[c];
                    }
                    T *= 1.0 - w.a;
                }
            }
        }
        for (int y = y_lo; y < y_hi; ++y) {
            for (int x = 0; x < K.width; ++x) {
                const double T   = out.final_transmittance[static_cast<size_t>(y) * K.width + x];
                const size_t pix = out.image.index(x, y);
                for (int c = 0; c < 3; ++c) {
                    img[pix + c] += T * scene.background[c];
                }
            }
        }
    });
    return out;
}

RadianceImage
render(const Scene &scene, const Pose &pose, const CameraIntrinsics &K, const RenderOptions &opts) {
    return render_full(scene, pose, K, opts).image;
}

BlurRender
render_blurred(const Scene &scene, const ExposureTrajectory &traj, int n, const CameraIntrinsics &K,
               const RenderOptions &opts) {
    BlurRender out;
    out.times   = latent_timestamps(traj, n);
    out.blurred = RadianceImage(K.width, K.height, 3);
    auto acc    = out.blurred.data();
    // Running mean: identical latents reproduce themselves bit-exactly.
    for (size_t k = 0; k < out.times.size(); ++k) {
        out.poses.push_back(interpolate_pose(traj, out.times[k]));
        out.latents.push_back(render(scene, out.poses.back(), K, opts));
        const auto   src = out.latents.back().data();
        const double w   = 1.0 / static_cast<double>(k + 1);
        for (size_t i = 0; i < acc.size(); ++i) {
            acc[i] += (src[i] - acc[i]) * w;
        }
    }
    return out;
}

GaussianGrad &
GaussianGrad::operator+=(const GaussianGrad &o) {
    position += o.position;
    log_scale += o.log_scale;
    rotation += o.rotation;
    opacity_logit += o.opacity_logit;
    if (sh.size() < o.sh.size()) {
        sh.resize(o.sh.size(), Eigen::Vector3d::Zero());
    }
    for (size_t k = 0; k < o.sh.size(); ++k) {
        sh[k] += o.sh[k];
    }
    return *this;
}

bool
GaussianGrad::all_finite() const {
    bool ok = position.allFinite() && log_scale.allFinite() && rotation.allFinite() && std::isfinite(opacity_logit);
    for (const auto &c : sh) {
        ok = ok && c.allFinite();
    }
    return ok;
}

bool
GradientBuffer::all_finite() const {
    bool ok = twist_start.vector().allFinite() && twist_end.vector().allFinite() && std::isfinite(loss);
    for (const auto &g : gaussians) {
        ok = ok && g.all_finite();
    }
    return ok;
}

namespace {

struct Grad2D {
    Eigen::Vector2d mean  = Eigen::Vector2d::Zero();
    double          ca    = 0.0; // conic(0,0)
    double          cb    = 0.0; // conic(0,1) == conic(1,0), counted once
    double          cc    = 0.0; // conic(1,1)
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    double          alpha = 0.0;

    Grad2D &
    operator+=(const Grad2D &o) {
        mean += o.mean;
        ca += o.ca;
        cb += o.cb;
        cc += o.cc;
        color += o.color;
        alpha += o.alpha;
        return *this;
    }
};

// d/dq of R(q) for a unit quaternion q = (w, x, y, z), contracted with dL/dR.
Eigen::Vector4d
quat_grad_from_rotation(const Eigen::Vector4d &q, const Eigen::Matrix3d &G) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Vector4d out;
    out[0] = 2.0 * (-z * G(0, 1) + y * G(0, 2) + z * G(1, 0) - x * G(1, 2) - y * G(2, 0) + x * G(2, 1));
    out[1] = 2.0 * (y * G(0, 1) + z * G(0, 2) + y * G(1, 0) - 2.0 * x * G(1, 1) - w * G(1, 2) + z * G(2, 0) +
                    w * G(2, 1) - 2.0 * x * G(2, 2));
    out[2] = 2.0 * (-2.0 * y * G(0, 0) + x * G(0, 1) + w * G(0, 2) + x * G(1, 0) + z * G(1, 2) - w * G(2, 0) +
                    z * G(2, 1) - 2.0 * y * G(2, 2));
    out[3] = 2.0 * (-2.0 * z * G(0, 0) - w * G(0, 1) + x * G(0, 2) + w * G(1, 0) - 2.0 * z * G(1, 1) + y * G(1, 2) +
                    x * G(2, 0) + y * G(2, 1));
    return out;
}

} // namespace

Vector6d
backward_view(const Scene &scene, const Pose &pose, const CameraIntrinsics &K, const RadianceImage &adjoint,
              std::vector<GaussianGrad> &scene_grad, const RenderOptions &opts) {
    K.validate();
    if (adjoint.width() != K.width || adjoint.height() != K.height || adjoint.channels() != 3) {
        throw std::invalid_argument("backward_view: adjoint image does not match intrinsics");
    }
    for (double v : adjoint.data()) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("backward_view: non-finite adjoint");
        }
    }
    const size_t ng    = scene.size();
    const int    ncoef = sh_coeff_count(scene.sh_degree);
    if (scene_grad.size() != ng) {
        scene_grad.assign(ng, GaussianGrad{});
        for (auto &g : scene_grad) {
            g.sh.assign(static_cast<size_t>(ncoef), Eigen::Vector3d::Zero());
        }
    }

    const Frame f = prepare(scene, pose, K, opts, true);

    // Forward pass for the final transmittance of each pixel.
    std::vector<double> final_T(static_cast<size_t>(K.width) * K.height, 1.0);
    const int           nbands = band_count(K.height);
    std::vector<std::vector<Grad2D>> band_grads(static_cast<size_t>(nbands));

    const auto adj = adjoint.data();
    detail::parallel_for(nbands, opts.threads, [&](int band) {
        const int y_lo = band * kBandRows;
        const int y_hi = std::min(K.height, y_lo + kBandRows);
        for (int idx : f.order) {
            const Projected2D &p = f.proj[static_cast<size_t>(idx)].p;
            if (p.y1 < y_lo || p.y0 >= y_hi) {
                continue;
            }
            for (int y = std::max(p.y0, y_lo); y <= std::min(p.y1, y_hi - 1); ++y) {
                for (int x = p.x0; x <= p.x1; ++x) {
                    PixelWeight w;
                    if (pixel_weight(p, x, y, opts, w)) {
                        final_T[static_cast<size_t>(y) * K.width + x] *= 1.0 - w.a;
                    }
                }
            }
        }

        // Back to front: T recovers the transmittance in front of each
        // Gaussian, R is the normalized color composited behind it.
        auto &grads = band_grads[static_cast<size_t>(band)];
        grads.assign(ng, Grad2D{});
        const int                    npix = (y_hi - y_lo) * K.width;
        std::vector<double>          T(static_cast<size_t>(npix));
        std::vector<Eigen::Vector3d> R(static_cast<size_t>(npix), scene.background);
        for (int y = y_lo; y < y_hi; ++y) {
            for (int x = 0; x < K.width; ++x) {
                T[static_cast<size_t>((y - y_lo) * K.width + x)] = final_T[static_cast<size_t>(y) * K.width + x];
            }
        }
        for (auto it = f.order.rbegin(); it != f.order.rend(); ++it) {
            const int          idx = *it;
            const Projected2D &p   = f.proj[static_cast<size_t>(idx)].p;
            if (p.y1 < y_lo || p.y0 >= y_hi) {
                continue;
            }
            Grad2D &gg = grads[static_cast<size_t>(idx)];
            for (int y = std::max(p.y0, y_lo); y <= std::min(p.y1, y_hi - 1); ++y) {
                for (int x = p.x0; x <= p.x1; ++x) {
                    PixelWeight w;
                    if (!pixel_weight(p, x, y, opts, w)) {
                        continue;
                    }
                    const size_t    local = static_cast<size_t>((y - y_lo) * K.width + x);
                    const size_t    pix   = adjoint.index(x, y);
                    const Eigen::Vector3d g(adj[pix], adj[pix + 1], adj[pix + 2]);
                    const double    Ti    = T[local] / (1.0 - w.a);
                    Eigen::Vector3d &Rb   = R[local];

                    gg.color += (w.a * Ti) * g;
                    const double dL_da = Ti * (p.color - Rb).dot(g);
                    if (!w.capped) {
                        gg.alpha += dL_da * w.G;
                        const double dL_dpower = dL_da * p.alpha * w.G;
                        const double dx        = x - p.mean2d.x();
                        const double dy        = y - p.mean2d.y();
                        gg.mean.x() += dL_dpower * (p.conic(0, 0) * dx + p.conic(0, 1) * dy);
                        gg.mean.y() += dL_dpower * (p.conic(0, 1) * dx + p.conic(1, 1) * dy);
                        gg.ca += dL_dpower * (-0.5 * dx * dx);
                        gg.cb += dL_dpower * (-dx * dy);
                        gg.cc += dL_dpower * (-0.5 * dy * dy);
                    }
                    Rb       = w.a * p.color + (1.0 - w.a) * Rb;
                    T[local] = Ti;
                }
            }
        }
    });

    // Fixed-order reduction over bands.
    std::vector<Grad2D> g2d(ng);
    for (const auto &bg : band_grads) {
        for (size_t i = 0; i < ng; ++i) {
            g2d[i] += bg[i];
        }
    }

    Vector6d      pose_grad = Vector6d::Zero();
    const Eigen::Matrix3d Rc = pose.R();
    for (int idx : f.order) {
        const auto             &d  = f.proj[static_cast<size_t>(idx)];
        const auto             &gg = g2d[static_cast<size_t>(idx)];
        const GaussianPrimitive &prim = scene.gaussians[static_cast<size_t>(idx)];
        GaussianGrad            &out  = scene_grad[static_cast<size_t>(idx)];

        // opacity
        out.opacity_logit += gg.alpha * d.p.alpha * (1.0 - d.p.alpha);

        // color -> SH coefficients and view direction
        Eigen::Vector3d gcol = gg.color;
        for (int c = 0; c < 3; ++c) {
            if (d.clamped[static_cast<size_t>(c)]) {
                gcol[c] = 0.0;
            }
        }
        Eigen::Vector3d g_dir = Eigen::Vector3d::Zero();
        for (int k = 0; k < ncoef; ++k) {
            out.sh[static_cast<size_t>(k)] += d.basis.value[static_cast<size_t>(k)] * gcol;
            if (k > 0) {
                g_dir += gcol.dot(prim.sh[static_cast<size_t>(k)]) * d.basis.grad[static_cast<size_t>(k)];
            }
        }
        const Eigen::Vector3d g_offset =
            (g_dir - d.dir * d.dir.dot(g_dir)) / d.dist; // d dir / d (mu - centre)
        out.position += g_offset;
        // centre moves by -R^T v under a left perturbation
        pose_grad.tail<3>() += Rc * g_offset;

        // conic -> cov2d
        const Eigen::Matrix2d &cov = d.p.cov2d;
        const double           pp = cov(0, 0), q = cov(0, 1), r = cov(1, 1);
        const double           det = pp * r - q * q;
        const double           id2 = 1.0 / (det * det);
        const double gp = gg.ca * (-r * r * id2) + gg.cb * (q * r * id2) + gg.cc * (1.0 / det - pp * r * id2);
        const double gq = gg.ca * (2.0 * q * r * id2) + gg.cb * (-1.0 / det - 2.0 * q * q * id2) +
                          gg.cc * (2.0 * q * pp * id2);
        const double gr = gg.ca * (1.0 / det - r * pp * id2) + gg.cb * (q * pp * id2) + gg.cc * (-pp * pp * id2);
        Eigen::Matrix2d Gcov;
        Gcov << gp, 0.5 * gq, 0.5 * gq, gr;

        // cov2d = J Sigma_c J^T
        const Eigen::Matrix3d              Gsig_c = d.J.transpose() * Gcov * d.J;
        const Eigen::Matrix<double, 2, 3> GJ     = 2.0 * Gcov * d.J * d.sigma_c;

        // camera-space mean from mean2d and J
        const double    z = d.xc.z(), x = d.xc.x(), y = d.xc.y();
        const double    z2 = z * z, z3 = z2 * z;
        Eigen::Vector3d g_xc;
        g_xc.x() = gg.mean.x() * K.fx / z + GJ(0, 2) * (-K.fx / z2);
        g_xc.y() = gg.mean.y() * K.fy / z + GJ(1, 2) * (-K.fy / z2);
        g_xc.z() = -gg.mean.x() * K.fx * x / z2 - gg.mean.y() * K.fy * y / z2 + GJ(0, 0) * (-K.fx / z2) +
                   GJ(0, 2) * (2.0 * K.fx * x / z3) + GJ(1, 1) * (-K.fy / z2) + GJ(1, 2) * (2.0 * K.fy * y / z3);

        out.position += Rc.transpose() * g_xc;
        pose_grad.head<3>() += d.xc.cross(g_xc);
        pose_grad.tail<3>() += g_xc;

        // Sigma_c = Rc Sigma Rc^T; left rotation perturbation gives
        // dSigma_c = [w]x Sigma_c - Sigma_c [w]x.
        for (int k = 0; k < 3; ++k) {
            const Eigen::Matrix3d E = hat(Eigen::Vector3d::Unit(k));
            pose_grad[k] += (Gsig_c.cwiseProduct(E * d.sigma_c - d.sigma_c * E)).sum();
        }

        // Sigma = Rg S^2 Rg^T
        const Eigen::Matrix3d Gsig = Rc.transpose() * Gsig_c * Rc;
        const Eigen::Matrix3d M    = d.Rg.transpose() * Gsig * d.Rg;
        for (int k = 0; k < 3; ++k) {
            out.log_scale[k] += M(k, k) * 2.0 * d.s2[k];
        }
        const Eigen::Matrix3d GRg = (Gsig + Gsig.transpose()) * d.Rg * d.s2.asDiagonal();
        const double          qn  = prim.rotation.norm();
        const Eigen::Vector4d qh  = prim.rotation / qn;
        const Eigen::Vector4d gqh = quat_grad_from_rotation(qh, GRg);
        out.rotation += (gqh - qh * qh.dot(gqh)) / qn;
    }
    return pose_grad;
}

GradientBuffer
backward_latents(const Scene &scene, const ExposureTrajectory &traj, const CameraIntrinsics &K,
                 const std::vector<double> &times, const std::vector<RadianceImage> &adjoints,
                 const RenderOptions &opts) {
    if (times.size() != adjoints.size()) {
        throw std::invalid_argument("backward_latents: one adjoint per latent time required");
    }
    GradientBuffer out;
    Vector6d       g_start = Vector6d::Zero();
    Vector6d       g_end   = Vector6d::Zero();
    for (size_t i = 0; i < times.size(); ++i) {
        const Pose     P   = interpolate_pose(traj, times[i]);
        const Vector6d gP  = backward_view(scene, P, K, adjoints[i], out.gaussians, opts);
        const auto     jac = interpolation_jacobian(traj, traj.fraction(times[i]));
        g_start += jac.wrt_start.transpose() * gP;
        g_end += jac.wrt_end.transpose() * gP;
    }
    if (out.gaussians.empty()) {
        out.gaussians.assign(scene.size(), GaussianGrad{});
        for (auto &g : out.gaussians) {
            g.sh.assign(static_cast<size_t>(sh_coeff_count(scene.sh_degree)), Eigen::Vector3d::Zero());
        }
    }
    out.twist_start = Twist(g_start);
    out.twist_end   = Twist(g_end);
    return out;
}

GradientBuffer
render_with_grad(const Scene &scene, const ExposureTrajectory &traj, const CameraIntrinsics &K, int n,
                 const RadianceImage &adjoint, const RenderOptions &opts) {
    const auto    times = latent_timestamps(traj, n);
    RadianceImage scaled(adjoint.width(), adjoint.height(), adjoint.channels());
    const auto    src = adjoint.data();
    auto          dst = scaled.data();
    for (size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i] / static_cast<double>(n);
    }
    return backward_latents(scene, traj, K, times, std::vector<RadianceImage>(times.size(), scaled), opts);
}

} // namespace evsplat
