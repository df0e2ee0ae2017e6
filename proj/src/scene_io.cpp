// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/json_io.hpp"

#include <fstream>
#include <stdexcept>

namespace evsplat {

namespace {

template <int N>
Json
vec_to_json(const Eigen::Matrix<double, N, 1> &v) {
    Json a = Json::array();
    for (int i = 0; i < N; ++i) {
        a.push_back(v[i]);
    }
    return a;
}

template <int N>
Eigen::Matrix<double, N, 1>
vec_from_json(const Json &j, const char *field) {
    if (!j.is_array() || j.size() != static_cast<size_t>(N)) {
        throw std::runtime_error(std::string("expected ") + std::to_string(N) + "-element array for '" + field + "'");
    }
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) {
        v[i] = j.at(static_cast<size_t>(i)).get<double>();
    }
    return v;
}

} // namespace

Json
pose_to_json(const Pose &p) {
    const auto &q = p.rotation;
    return Json{{"q", {q.w(), q.x(), q.y(), q.z()}}, {"t", vec_to_json<3>(p.translation)}};
}

Pose
pose_from_json(const Json &j) {
    const Eigen::Vector4d q = vec_from_json<4>(j.at("q"), "q");
    Pose                  p;
    // Keep stored values verbatim when they are already unit length so that
    // save/load round trips are bit-exact.
    p.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    if (std::abs(p.rotation.norm() - 1.0) > 1e-12) {
        p.rotation.normalize();
    }
    p.translation = vec_from_json<3>(j.at("t"), "t");
    return p;
}

Json
trajectory_to_json(const ExposureTrajectory &t) {
    return Json{{"start", pose_to_json(t.pose_start)},
                {"end", pose_to_json(t.pose_end)},
                {"t_start", t.t_start},
                {"t_end", t.t_end}};
}

ExposureTrajectory
trajectory_from_json(const Json &j) {
    return ExposureTrajectory(pose_from_json(j.at("start")), pose_from_json(j.at("end")),
                              j.at("t_start").get<double>(), j.at("t_end").get<double>());
}

Json
intrinsics_to_json(const CameraIntrinsics &k) {
    return Json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics
intrinsics_from_json(const Json &j) {
    CameraIntrinsics k;
    k.fx     = j.at("fx").get<double>();
    k.fy     = j.at("fy").get<double>();
    k.cx     = j.at("cx").get<double>();
    k.cy     = j.at("cy").get<double>();
    k.width  = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    k.validate();
    return k;
}

Json
scene_to_json(const Scene &s) {
    Json gs = Json::array();
    for (const auto &g : s.gaussians) {
        Json sh = Json::array();
        for (int c = 0; c < 3; ++c) {
            Json ch = Json::array();
            for (const auto &coef : g.sh) {
                ch.push_back(coef[c]);
            }
            sh.push_back(std::move(ch));
        }
        gs.push_back(Json{{"pos", vec_to_json<3>(g.position)},
                          {"log_scale", vec_to_json<3>(g.log_scale)},
                          {"q", vec_to_json<4>(g.rotation)},
                          {"opacity_logit", g.opacity_logit},
                          {"sh", std::move(sh)}});
    }
    return Json{{"sh_degree", s.sh_degree}, {"background", vec_to_json<3>(s.background)}, {"gaussians", std::move(gs)}};
}

Scene
scene_from_json(const Json &j) {
    Scene s;
    s.sh_degree  = j.at("sh_degree").get<int>();
    s.background = vec_from_json<3>(j.at("background"), "background");
    for (const auto &jg : j.at("gaussians")) {
        GaussianPrimitive g;
        g.position      = vec_from_json<3>(jg.at("pos"), "pos");
        g.log_scale     = vec_from_json<3>(jg.at("log_scale"), "log_scale");
        g.rotation      = vec_from_json<4>(jg.at("q"), "q");
        g.opacity_logit = jg.at("opacity_logit").get<double>();
        const Json &sh  = jg.at("sh");
        if (!sh.is_array() || sh.size() != 3) {
            throw std::runtime_error("scene: 'sh' must hold one array per color channel");
        }
        const size_t ncoef = sh[0].size();
        g.sh.assign(ncoef, Eigen::Vector3d::Zero());
        for (int c = 0; c < 3; ++c) {
            if (sh[static_cast<size_t>(c)].size() != ncoef) {
                throw std::runtime_error("scene: SH channels have different lengths");
            }
            for (size_t k = 0; k < ncoef; ++k) {
                g.sh[k][c] = sh[static_cast<size_t>(c)][k].get<double>();
            }
        }
        s.gaussians.push_back(std::move(g));
    }
    s.validate();
    return s;
}

Json
read_json_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    try {
        return Json::parse(in);
    } catch (const Json::exception &e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void
write_json_file(const std::filesystem::path &path, const Json &j) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << j.dump(1) << '\n';
}

void
save_scene(const std::filesystem::path &path, const Scene &scene) {
    write_json_file(path, scene_to_json(scene));
}

Scene
load_scene(const std::filesystem::path &path) {
    try {
        return scene_from_json(read_json_file(path));
    } catch (const Json::exception &e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

} // namespace evsplat
