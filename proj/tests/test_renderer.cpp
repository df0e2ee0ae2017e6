// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/renderer.hpp"

#include "support/fd.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace evsplat {
namespace {

using testing::naive_render;
using testing::random_scene;
using testing::small_camera;

double
max_abs_diff(const RadianceImage &a, const RadianceImage &b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    }
    return m;
}

GaussianPrimitive
isotropic(const Eigen::Vector3d &pos, double sigma, double opacity, const Eigen::Vector3d &rgb) {
    GaussianPrimitive g;
    g.position      = pos;
    g.log_scale     = Eigen::Vector3d::Constant(std::log(sigma));
    g.opacity_logit = logit(opacity);
    g.sh            = {rgb_to_sh0(rgb), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
    return g;
}

TEST(ProjectGaussian, OnAxisLandsAtPrincipalPoint) {
    const CameraIntrinsics K = small_camera(32, 40.0);
    const auto p = project_gaussian(isotropic({0, 0, 2}, 0.1, 0.5, {1, 1, 1}), 1, Pose{}, K);
    ASSERT_TRUE(p.has_value());
    EXPECT_DOUBLE_EQ(p->mean2d.x(), K.cx);
    EXPECT_DOUBLE_EQ(p->mean2d.y(), K.cy);
    EXPECT_DOUBLE_EQ(p->depth, 2.0);
}

TEST(ProjectGaussian, BehindCameraIsCulled) {
    const CameraIntrinsics K = small_camera(32, 40.0);
    EXPECT_FALSE(project_gaussian(isotropic({0, 0, -1}, 0.1, 0.5, {1, 1, 1}), 1, Pose{}, K).has_value());
    EXPECT_FALSE(project_gaussian(isotropic({0, 0, 0.005}, 0.1, 0.5, {1, 1, 1}), 1, Pose{}, K).has_value());
}

TEST(ProjectGaussian, FootprintOutsideImageIsCulled) {
    const CameraIntrinsics K = small_camera(32, 40.0);
    EXPECT_FALSE(project_gaussian(isotropic({20, 0, 2}, 0.05, 0.5, {1, 1, 1}), 1, Pose{}, K).has_value());
}

TEST(ProjectGaussian, IsotropicCovarianceMatchesMonteCarlo) {
    const CameraIntrinsics K     = small_camera(64, 50.0);
    const double           sigma = 0.05, z = 3.0;
    const auto             p     = project_gaussian(isotropic({0, 0, z}, sigma, 0.5, {1, 1, 1}), 1, Pose{}, K);
    ASSERT_TRUE(p.has_value());

    // Monte-Carlo: project 1e6 samples of the 3D Gaussian through the pinhole
    // and compare the sample covariance (plus the low-pass floor).
    std::mt19937_64                  rng(1);
    std::normal_distribution<double> n01(0.0, 1.0);
    const int                        N = 1000000;
    Eigen::Vector2d                  mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d                  m2   = Eigen::Matrix2d::Zero();
    for (int i = 0; i < N; ++i) {
        const Eigen::Vector3d x(sigma * n01(rng), sigma * n01(rng), z + sigma * n01(rng));
        const Eigen::Vector2d u(K.fx * x.x() / x.z(), K.fy * x.y() / x.z());
        mean += u;
        m2 += u * u.transpose();
    }
    mean /= N;
    const Eigen::Matrix2d cov = m2 / N - mean * mean.transpose();
    const double          expected = std::pow(K.fx * sigma / z, 2);
    EXPECT_NEAR(p->cov2d(0, 0), expected + 0.3, 1e-12);
    EXPECT_NEAR(p->cov2d(1, 1), expected + 0.3, 1e-12);
    EXPECT_NEAR(cov(0, 0) + 0.3, p->cov2d(0, 0), 0.01 * p->cov2d(0, 0));
    EXPECT_NEAR(cov(1, 1) + 0.3, p->cov2d(1, 1), 0.01 * p->cov2d(1, 1));
    EXPECT_NEAR(cov(0, 1), p->cov2d(0, 1), 0.01 * expected);
}

TEST(Render, EmptyPixelsShowBackground) {
    const CameraIntrinsics K = small_camera(32, 40.0);
    Scene                  s;
    s.background = {0.2, 0.4, 0.6};
    s.gaussians.push_back(isotropic({0, 0, 2}, 0.02, 0.5, {1, 0, 0}));
    const RadianceImage img = render(s, Pose{}, K);
    for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(img.at(0, 0, c), s.background[c]);
    }
}

TEST(Render, SingleGaussianAtItsCentre) {
    CameraIntrinsics K = small_camera(33, 40.0); // odd size: principal point is a pixel centre
    Scene            s;
    s.background = {0.2, 0.4, 0.6};
    const Eigen::Vector3d c(0.8, 0.3, 0.1);
    s.gaussians.push_back(isotropic({0, 0, 2}, 0.1, 0.9, c));
    const RadianceImage img = render(s, Pose{}, K);
    for (int ch = 0; ch < 3; ++ch) {
        EXPECT_NEAR(img.at(16, 16, ch), 0.9 * c[ch] + 0.1 * s.background[ch], 1e-12);
    }
}

TEST(Render, MatchesNaiveCompositorOnRandomScenes) {
    const CameraIntrinsics K = small_camera(24, 30.0);
    std::mt19937_64        rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Scene s    = random_scene(rng, 6, 1, 1.0, 3.0, 0.6, -3.0, -1.0, -2.0, 5.0);
        const Pose  pose = testing::random_small_pose(rng, 0.05, 0.05);
        EXPECT_LT(max_abs_diff(render(s, pose, K), naive_render(s, pose, K)), 1e-12);
    }
}

TEST(Render, TransmittanceBookkeeping) {
    const CameraIntrinsics K = small_camera(24, 30.0);
    std::mt19937_64        rng(8);
    Scene                  s = random_scene(rng, 8, 0, 1.0, 3.0, 0.6, -3.0, -1.0, -2.0, 5.0);
    // A white scene on black background renders the accumulated weight.
    s.background.setZero();
    for (auto &g : s.gaussians) {
        g.sh[0] = rgb_to_sh0({1, 1, 1});
    }
    const RenderResult r = render_full(s, Pose{}, K);
    for (int y = 0; y < K.height; ++y) {
        for (int x = 0; x < K.width; ++x) {
            const double weight = r.image.at(x, y, 0);
            const double T      = r.final_transmittance[static_cast<size_t>(y * K.width + x)];
            EXPECT_NEAR(weight + T, 1.0, 1e-12);
        }
    }
}

TEST(Render, InvariantToInputOrder) {
    const CameraIntrinsics K = small_camera(24, 30.0);
    std::mt19937_64        rng(9);
    Scene                  s = random_scene(rng, 10, 1, 1.0, 3.0);
    const RadianceImage    a = render(s, Pose{}, K);
    std::shuffle(s.gaussians.begin(), s.gaussians.end(), rng);
    EXPECT_EQ(render(s, Pose{}, K), a);
}

TEST(Render, ThreadCountDoesNotChangeOutput) {
    const CameraIntrinsics K = small_camera(40, 40.0);
    std::mt19937_64        rng(10);
    const Scene            s = random_scene(rng, 20, 1, 1.0, 3.0);
    RenderOptions          one, four;
    four.threads = 4;
    EXPECT_EQ(render(s, Pose{}, K, one), render(s, Pose{}, K, four));
}

TEST(RenderBlurred, StaticTrajectoryEqualsSharpRender) {
    const CameraIntrinsics   K = small_camera(24, 30.0);
    std::mt19937_64          rng(11);
    const Scene              s = random_scene(rng, 5, 1, 1.0, 3.0);
    const Pose               p = testing::random_small_pose(rng, 0.05, 0.05);
    const ExposureTrajectory traj(p, p, 0.0, 0.01);
    EXPECT_LT(max_abs_diff(render_blurred(s, traj, 5, K).blurred, render(s, p, K)), 1e-15);
}

TEST(RenderBlurred, ThreeSampleMean) {
    const CameraIntrinsics   K = small_camera(24, 30.0);
    std::mt19937_64          rng(12);
    const Scene              s = random_scene(rng, 5, 1, 1.0, 3.0);
    const ExposureTrajectory traj(Pose{}, testing::random_small_pose(rng, 0.03, 0.05), 0.0, 1.0);
    const BlurRender         b  = render_blurred(s, traj, 3, K);
    const RadianceImage      r0 = render(s, interpolate_pose(traj, 0.0), K);
    const RadianceImage      r1 = render(s, interpolate_pose(traj, 0.5), K);
    const RadianceImage      r2 = render(s, interpolate_pose(traj, 1.0), K);
    ASSERT_EQ(b.latents.size(), 3u);
    for (size_t i = 0; i < r0.size(); ++i) {
        EXPECT_NEAR(b.blurred.data()[i], (r0.data()[i] + r1.data()[i] + r2.data()[i]) / 3.0, 1e-15);
    }
}

TEST(RenderBlurred, LinearInColorDeviationFromGray) {
    const CameraIntrinsics   K = small_camera(24, 30.0);
    Scene                    s;
    s.background = {0.1, 0.1, 0.1};
    s.sh_degree  = 0;
    GaussianPrimitive g = isotropic({0, 0, 2}, 0.15, 0.7, {0.6, 0.55, 0.45});
    g.sh.resize(1);
    s.gaussians.push_back(g);
    const ExposureTrajectory traj(Pose{}, se3_exp(Twist({0.0, 0.02, 0.0}, {0.02, 0, 0})), 0.0, 1.0);

    Scene gray = s;
    gray.gaussians[0].sh[0].setZero();
    Scene doubled = s;
    doubled.gaussians[0].sh[0] *= 2.0;

    const auto b_gray = render_blurred(gray, traj, 5, K).blurred;
    const auto b_one  = render_blurred(s, traj, 5, K).blurred;
    const auto b_two  = render_blurred(doubled, traj, 5, K).blurred;
    for (size_t i = 0; i < b_one.size(); ++i) {
        EXPECT_NEAR(b_two.data()[i] - b_gray.data()[i], 2.0 * (b_one.data()[i] - b_gray.data()[i]), 1e-14);
    }
}

TEST(RenderBlurred, StaticTrajectoryConvergesExactly) {
    const CameraIntrinsics   K = small_camera(16, 20.0);
    std::mt19937_64          rng(13);
    const Scene              s = random_scene(rng, 4, 1, 1.0, 3.0);
    const ExposureTrajectory traj(Pose{}, Pose{}, 0.0, 1.0);
    EXPECT_EQ(max_abs_diff(render_blurred(s, traj, 5, K).blurred, render_blurred(s, traj, 101, K).blurred), 0.0);
}

TEST(RenderBlurred, QuadratureErrorShrinksWithTrajectoryLength) {
    const CameraIntrinsics K = small_camera(24, 30.0);
    std::mt19937_64        rng(14);
    const Scene            s = random_scene(rng, 6, 1, 1.5, 3.0);
    const Twist            motion({0.01, 0.03, -0.02}, {0.04, -0.02, 0.01});
    double                 previous = 1e9;
    for (double scale : {1.0, 0.2, 0.04}) {
        const ExposureTrajectory traj(Pose{}, se3_exp(motion * scale), 0.0, 1.0);
        const double err = max_abs_diff(render_blurred(s, traj, 5, K).blurred, render_blurred(s, traj, 101, K).blurred);
        EXPECT_LT(err, previous);
        previous = err;
    }
}

class RenderGradient : public ::testing::Test {
  protected:
    static RadianceImage
    random_adjoint(std::mt19937_64 &rng, const CameraIntrinsics &K) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        RadianceImage                          a(K.width, K.height, 3);
        for (double &v : a.data()) {
            v = u(rng);
        }
        return a;
    }
};

TEST_F(RenderGradient, ZeroAdjointGivesZeroGradient) {
    const CameraIntrinsics   K = small_camera(16, 20.0);
    std::mt19937_64          rng(1);
    const Scene              s = random_scene(rng, 3, 1);
    const ExposureTrajectory traj(Pose{}, testing::random_small_pose(rng, 0.02, 0.02), 0.0, 1.0);
    const GradientBuffer     g = render_with_grad(s, traj, K, 5, RadianceImage(16, 16, 3));
    for (const auto &gg : g.gaussians) {
        EXPECT_EQ(gg.position, Eigen::Vector3d::Zero());
        EXPECT_EQ(gg.opacity_logit, 0.0);
        EXPECT_EQ(gg.rotation, Eigen::Vector4d::Zero());
    }
    EXPECT_EQ(g.twist_start.vector(), Vector6d::Zero());
    EXPECT_EQ(g.twist_end.vector(), Vector6d::Zero());
}

TEST_F(RenderGradient, RejectsNonFiniteAdjoint) {
    const CameraIntrinsics   K = small_camera(16, 20.0);
    std::mt19937_64          rng(1);
    const Scene              s = random_scene(rng, 3, 1);
    const ExposureTrajectory traj(Pose{}, Pose{}, 0.0, 1.0);
    RadianceImage            adj(16, 16, 3);
    adj.at(3, 3, 1) = std::nan("");
    EXPECT_THROW(render_with_grad(s, traj, K, 5, adj), std::invalid_argument);
    EXPECT_THROW(render_with_grad(s, traj, K, 5, RadianceImage(8, 16, 3)), std::invalid_argument);
}

double
weighted_sum(const RadianceImage &img, const RadianceImage &adj) {
    double sum = 0.0;
    for (size_t i = 0; i < img.size(); ++i) {
        sum += img.data()[i] * adj.data()[i];
    }
    return sum;
}

// The skip threshold makes pixels near a footprint edge jump by ~1/255, so
// small-footprint scenes are checked with the threshold disabled.
TEST_F(RenderGradient, MatchesFiniteDifferencesWithoutSkipThreshold) {
    const CameraIntrinsics K = small_camera(16, 20.0);
    RenderOptions          opts;
    opts.alpha_min = 0.0;
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 3; ++trial) {
        const Scene              s = random_scene(rng, 3, 1);
        const ExposureTrajectory traj(testing::random_small_pose(rng, 0.03, 0.05),
                                      testing::random_small_pose(rng, 0.03, 0.05), 0.0, 1.0);
        const RadianceImage      adj       = random_adjoint(rng, K);
        const auto               objective = [&](const Scene &sc, const ExposureTrajectory &t) {
            return weighted_sum(render_blurred(sc, t, 5, K, opts).blurred, adj);
        };
        const GradientBuffer g      = render_with_grad(s, traj, K, 5, adj, opts);
        const auto           report = testing::check_gradients(s, traj, objective, g, 1e-3, 1e-8);
        EXPECT_EQ(report.failed, 0) << "worst " << report.worst_name << " rel " << report.worst_rel << " analytic "
                                    << report.worst_analytic << " numeric " << report.worst_numeric;
    }
}

// Wide footprints keep every pixel above the skip threshold, so the default
// renderer is smooth in all parameters.
TEST_F(RenderGradient, MatchesFiniteDifferencesWideFootprints) {
    const CameraIntrinsics K = small_camera(16, 20.0);
    std::mt19937_64        rng(4048);
    for (int trial = 0; trial < 3; ++trial) {
        const Scene s = random_scene(rng, 3, 1, 2.5, 3.5, 0.2, -0.3, 0.2, -0.5, 1.5);
        const ExposureTrajectory traj(testing::random_small_pose(rng, 0.03, 0.05),
                                      testing::random_small_pose(rng, 0.03, 0.05), 0.0, 1.0);
        const RadianceImage      adj       = random_adjoint(rng, K);
        const auto               objective = [&](const Scene &sc, const ExposureTrajectory &t) {
            return weighted_sum(render_blurred(sc, t, 5, K).blurred, adj);
        };
        const GradientBuffer g      = render_with_grad(s, traj, K, 5, adj);
        const auto           report = testing::check_gradients(s, traj, objective, g, 1e-3, 1e-8);
        EXPECT_EQ(report.failed, 0) << "worst " << report.worst_name << " rel " << report.worst_rel << " analytic "
                                    << report.worst_analytic << " numeric " << report.worst_numeric;
    }
}

TEST_F(RenderGradient, HigherShDegreeMatchesFiniteDifferences) {
    const CameraIntrinsics K = small_camera(16, 20.0);
    std::mt19937_64        rng(77);
    const Scene            s = random_scene(rng, 2, 3);
    const ExposureTrajectory traj(Pose{}, testing::random_small_pose(rng, 0.05, 0.05), 0.0, 1.0);
    const RadianceImage    adj = random_adjoint(rng, K);
    RenderOptions          opts;
    opts.alpha_min       = 0.0;
    const auto objective = [&](const Scene &sc, const ExposureTrajectory &t) {
        return weighted_sum(render_blurred(sc, t, 3, K, opts).blurred, adj);
    };
    const auto report =
        testing::check_gradients(s, traj, objective, render_with_grad(s, traj, K, 3, adj, opts), 1e-3, 1e-8);
    EXPECT_EQ(report.failed, 0) << "worst " << report.worst_name << " rel " << report.worst_rel;
}

TEST_F(RenderGradient, OpacityIncreasesFrontColorWeight) {
    const CameraIntrinsics K = small_camera(33, 40.0);
    Scene                  s;
    s.background = {0.0, 0.0, 0.0};
    s.gaussians.push_back(isotropic({0, 0, 2}, 0.1, 0.5, {1, 0, 0}));
    s.gaussians.push_back(isotropic({0, 0, 3}, 0.2, 0.8, {0, 0, 1}));
    // adjoint selects the red channel at the front Gaussian's centre pixel
    RadianceImage adj(33, 33, 3);
    adj.at(16, 16, 0) = 1.0;
    const ExposureTrajectory traj(Pose{}, Pose{}, 0.0, 1.0);
    const auto               g = render_with_grad(s, traj, K, 1, adj);
    EXPECT_GT(g.gaussians[0].opacity_logit, 0.0);
    // two-point forward evaluation agrees in sign
    Scene more = s;
    more.gaussians[0].opacity_logit += 0.1;
    EXPECT_GT(render(more, Pose{}, K).at(16, 16, 0), render(s, Pose{}, K).at(16, 16, 0));
}

TEST_F(RenderGradient, ThreadCountDoesNotChangeGradients) {
    const CameraIntrinsics   K = small_camera(32, 30.0);
    std::mt19937_64          rng(5);
    const Scene              s = random_scene(rng, 10, 1);
    const ExposureTrajectory traj(Pose{}, testing::random_small_pose(rng, 0.03, 0.03), 0.0, 1.0);
    const RadianceImage      adj = random_adjoint(rng, K);
    RenderOptions            four;
    four.threads = 4;
    const auto a = render_with_grad(s, traj, K, 5, adj);
    const auto b = render_with_grad(s, traj, K, 5, adj, four);
    for (size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(a.gaussians[i].position, b.gaussians[i].position);
        EXPECT_EQ(a.gaussians[i].sh, b.gaussians[i].sh);
    }
    EXPECT_EQ(a.twist_end.vector(), b.twist_end.vector());
}

} // namespace
} // namespace evsplat
