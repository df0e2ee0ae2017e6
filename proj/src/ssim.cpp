// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/losses.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace evsplat {

namespace {

using Plane = std::vector<double>;

const std::array<double, kSsimWindow> &
gaussian_kernel() {
    static const std::array<double, kSsimWindow> k = [] {
        std::array<double, kSsimWindow> w{};
        double                          sum = 0.0;
        for (int i = 0; i < kSsimWindow; ++i) {
            const double d = i - kSsimWindow / 2;
            w[i]           = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
            sum += w[i];
        }
        for (double &v : w) {
            v /= sum;
        }
        return w;
    }();
    return k;
}

// Valid-region separable correlation: W x H -> (W-10) x (H-10).
Plane
filter_valid(const Plane &src, int W, int H) {
    const auto &k  = gaussian_kernel();
    const int   ow = W - kSsimWindow + 1, oh = H - kSsimWindow + 1;
    Plane       tmp(static_cast<size_t>(ow) * H, 0.0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) {
                s += k[i] * src[static_cast<size_t>(y) * W + x + i];
            }
            tmp[static_cast<size_t>(y) * ow + x] = s;
        }
    }
    Plane out(static_cast<size_t>(ow) * oh, 0.0);
    for (int y = 0; y < oh; ++y) {
        for (int i = 0; i < kSsimWindow; ++i) {
            const double ki  = k[i];
            const double *row = tmp.data() + static_cast<size_t>(y + i) * ow;
            double       *o   = out.data() + static_cast<size_t>(y) * ow;
            for (int x = 0; x < ow; ++x) {
                o[x] += ki * row[x];
            }
        }
    }
    return out;
}

// Transpose of filter_valid: scatters (W-10) x (H-10) back to W x H.
Plane
filter_adjoint(const Plane &src, int W, int H) {
    const auto &k  = gaussian_kernel();
    const int   ow = W - kSsimWindow + 1, oh = H - kSsimWindow + 1;
    Plane       tmp(static_cast<size_t>(ow) * H, 0.0);
    for (int y = 0; y < oh; ++y) {
        for (int i = 0; i < kSsimWindow; ++i) {
            const double  ki  = k[i];
            const double *s   = src.data() + static_cast<size_t>(y) * ow;
            double       *row = tmp.data() + static_cast<size_t>(y + i) * ow;
            for (int x = 0; x < ow; ++x) {
                row[x] += ki * s[x];
            }
        }
    }
    Plane out(static_cast<size_t>(W) * H, 0.0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double v = tmp[static_cast<size_t>(y) * ow + x];
            for (int i = 0; i < kSsimWindow; ++i) {
                out[static_cast<size_t>(y) * W + x + i] += k[i] * v;
            }
        }
    }
    return out;
}

Plane
channel(const RadianceImage &img, int c) {
    Plane p(static_cast<size_t>(img.width()) * img.height());
    for (size_t i = 0; i < p.size(); ++i) {
        p[i] = img.data()[i * img.channels() + c];
    }
    return p;
}

TermResult
ssim_impl(const RadianceImage &a, const RadianceImage &b, bool with_grad) {
    require_same_shape(a, b, "ssim");
    if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
        throw std::invalid_argument("ssim: images are " + std::to_string(a.width()) + "x" +
                                    std::to_string(a.height()) + ", smaller than the 11x11 window");
    }
    const int    W = a.width(), H = a.height(), C = a.channels();
    const size_t nout  = static_cast<size_t>(W - kSsimWindow + 1) * (H - kSsimWindow + 1);
    const double C1    = kSsimK1 * kSsimK1;
    const double C2    = kSsimK2 * kSsimK2;
    const double scale = 1.0 / (static_cast<double>(nout) * C);

    TermResult r;
    if (with_grad) {
        r.adjoint = RadianceImage(W, H, C);
    }
    for (int c = 0; c < C; ++c) {
        const Plane pa = channel(a, c), pb = channel(b, c);
        Plane       aa(pa.size()), bb(pa.size()), ab(pa.size());
        for (size_t i = 0; i < pa.size(); ++i) {
            aa[i] = pa[i] * pa[i];
            bb[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        const Plane mu_a = filter_valid(pa, W, H), mu_b = filter_valid(pb, W, H);
        const Plane e_aa = filter_valid(aa, W, H), e_bb = filter_valid(bb, W, H), e_ab = filter_valid(ab, W, H);

        Plane g_mu, g_aa, g_ab;
        if (with_grad) {
            g_mu.resize(nout);
            g_aa.resize(nout);
            g_ab.resize(nout);
        }
        for (size_t p = 0; p < nout; ++p) {
            const double ma = mu_a[p], mb = mu_b[p];
            const double A1 = 2 * ma * mb + C1;
            const double A2 = 2 * (e_ab[p] - ma * mb) + C2;
            const double B1 = ma * ma + mb * mb + C1;
            const double B2 = (e_aa[p] - ma * ma) + (e_bb[p] - mb * mb) + C2;
            const double S  = A1 * A2 / (B1 * B2);
            r.value += S * scale;
            if (with_grad) {
                const double Ss = S * scale;
                // grouped so identical inputs cancel to an exact zero
                g_mu[p] = Ss * (2 * mb * (1 / A1 - 1 / A2) - 2 * ma * (1 / B1 - 1 / B2));
                g_aa[p] = -Ss / B2;
                g_ab[p] = 2 * Ss / A2;
            }
        }
        if (with_grad) {
            const Plane s_mu = filter_adjoint(g_mu, W, H);
            const Plane s_aa = filter_adjoint(g_aa, W, H);
            const Plane s_ab = filter_adjoint(g_ab, W, H);
            for (size_t i = 0; i < pa.size(); ++i) {
                r.adjoint.data()[i * C + c] = s_mu[i] + 2 * pa[i] * s_aa[i] + pb[i] * s_ab[i];
            }
        }
    }
    return r;
}

} // namespace

double
ssim(const RadianceImage &a, const RadianceImage &b) {
    return ssim_impl(a, b, false).value;
}

TermResult
ssim_with_grad(const RadianceImage &a, const RadianceImage &b) {
    return ssim_impl(a, b, true);
}

} // namespace evsplat
