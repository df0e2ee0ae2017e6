// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/dataset.hpp"

#include "evsplat/edi.hpp"
#include "evsplat/events.hpp"
#include "evsplat/image_io.hpp"
#include "evsplat/renderer.hpp"
#include "evsplat/sh.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace evsplat {

namespace {

constexpr double kPi = 3.14159265358979323846;

double
deg2rad(double d) {
    return d * kPi / 180.0;
}

std::string
numbered(const char *pattern, int i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, i);
    return buf;
}

Eigen::Vector3d
random_unit(std::mt19937_64 &rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::Vector3d                  v;
    do {
        v = Eigen::Vector3d(n01(rng), n01(rng), n01(rng));
    } while (v.norm() < 1e-9);
    return v.normalized();
}

Scene
random_gt_scene(const SynthConfig &cfg, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double>       n01(0.0, 1.0);
    Scene                                  s;
    s.sh_degree     = cfg.sh_degree;
    s.background    = cfg.background;
    const double h  = 0.5 * cfg.extent;
    const int ncoef = sh_coeff_count(cfg.sh_degree);
    for (int i = 0; i < cfg.gaussians; ++i) {
        GaussianPrimitive g;
        g.position = Eigen::Vector3d(h * (2 * u(rng) - 1), h * (2 * u(rng) - 1), h * (2 * u(rng) - 1));
        for (int a = 0; a < 3; ++a) {
            g.log_scale[a] = std::log(cfg.extent * (0.025 + 0.05 * u(rng)));
        }
        g.rotation      = Eigen::Vector4d(n01(rng), n01(rng), n01(rng), n01(rng)).normalized();
        g.opacity_logit = logit(0.5 + 0.45 * u(rng));
        g.sh.assign(static_cast<size_t>(ncoef), Eigen::Vector3d::Zero());
        g.sh[0] = rgb_to_sh0(Eigen::Vector3d(0.05 + 0.9 * u(rng), 0.05 + 0.9 * u(rng), 0.05 + 0.9 * u(rng)));
        for (int k = 1; k < ncoef; ++k) {
            g.sh[static_cast<size_t>(k)] = 0.1 * Eigen::Vector3d(n01(rng), n01(rng), n01(rng));
        }
        s.gaussians.push_back(std::move(g));
    }
    return s;
}

Pose
random_view(const SynthConfig &cfg, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double                           az = 2 * kPi * u(rng);
    const double el = deg2rad(cfg.max_elevation_deg) * (2 * u(rng) - 1);
    const Eigen::Vector3d c =
        cfg.camera_distance * Eigen::Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    return look_at(c, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ());
}

/// Rotates by exactly `rot` radians about a random axis (camera centre kept)
/// and then moves the centre by exactly `shift`.
Pose
perturb(const Pose &p, double rot, double shift, std::mt19937_64 &rng) {
    const Pose            r = se3_exp(Twist(rot * random_unit(rng), Eigen::Vector3d::Zero())) * p;
    const Eigen::Vector3d c = r.center() + shift * random_unit(rng);
    return Pose(r.rotation, -(r.rotation * c));
}

Json
rel(const std::filesystem::path &p) {
    return p.generic_string();
}

} // namespace

void
SynthConfig::validate() const {
    if (width < 11 || height < 11) {
        throw std::invalid_argument("synth: images must be at least 11x11");
    }
    if (gaussians < 1 || views < 1 || eval_views < 0) {
        throw std::invalid_argument("synth: need >= 1 gaussian and >= 1 view");
    }
    if (sh_degree < 0 || sh_degree > 3) {
        throw std::invalid_argument("synth: sh_degree must be in 0..3");
    }
    if (dense_frames < kMinDenseFrames || dense_frames % 2 == 0) {
        throw std::invalid_argument("synth: dense_frames must be odd and >= " + std::to_string(kMinDenseFrames));
    }
    if (!(event_lead_in >= 0.0 && event_lead_in <= 100.0)) {
        throw std::invalid_argument("synth: event_lead_in must be in [0, 100]");
    }
    if (!(exposure > 0.0)) {
        throw std::invalid_argument(shake_rotation_deg > 0.0 || shake_translation > 0.0
                                        ? "synth: zero-length exposure with shake requested"
                                        : "synth: exposure must be > 0");
    }
    if (shake_rotation_deg < 0.0 || shake_translation < 0.0 || shake_rotation_deg >= 180.0) {
        throw std::invalid_argument("synth: shake amplitudes must be in [0, 180) degrees and >= 0");
    }
    if (!(view_spacing >= exposure)) {
        throw std::invalid_argument("synth: view_spacing must be >= exposure so windows do not overlap");
    }
    if (!(focal > 0.0) || !(extent > 0.0) || !(camera_distance > extent)) {
        throw std::invalid_argument("synth: need focal > 0 and camera_distance > extent > 0");
    }
    if (!(theta > 0.0) || !(log_eps > 0.0)) {
        throw std::invalid_argument("synth: theta and log_eps must be > 0");
    }
}

Pose
look_at(const Eigen::Vector3d &center, const Eigen::Vector3d &target, const Eigen::Vector3d &up) {
    const Eigen::Vector3d z = (target - center).normalized();
    Eigen::Vector3d       x = z.cross(up);
    if (x.norm() < 1e-9) {
        throw std::invalid_argument("look_at: viewing direction parallel to up");
    }
    x.normalize();
    const Eigen::Vector3d y = z.cross(x);
    Eigen::Matrix3d       R;
    R.row(0) = x;
    R.row(1) = y;
    R.row(2) = z;
    return Pose(Eigen::Quaterniond(R), -R * center);
}

namespace {

EventStream
exposure_events(const Scene &gt, const ExposureTrajectory &traj, const BlurRender &br, const SynthConfig &cfg,
                const CameraIntrinsics &K, const EventConfig &ecfg) {
    const int   steps = cfg.dense_frames - 1;
    const int   lead  = static_cast<int>(std::lround(cfg.event_lead_in * steps));
    const Twist rel   = se3_log(traj.pose_start.inverse() * traj.pose_end);

    std::vector<TimedFrame> frames;
    frames.reserve(static_cast<size_t>(lead) + br.latents.size());
    for (int j = lead; j >= 1; --j) {
        const double s    = -static_cast<double>(j) / steps;
        const Pose   pose = traj.pose_start * se3_exp(rel * s);
        frames.push_back({traj.t_start + s * traj.duration(), log_luminance(render(gt, pose, K), ecfg)});
    }
    for (size_t k = 0; k < br.latents.size(); ++k) {
        frames.push_back({br.times[k], log_luminance(br.latents[k], ecfg)});
    }
    const EventStream all = simulate_events(frames, ecfg);
    std::vector<Event> kept;
    for (const Event &e : all.events()) {
        if (e.t > traj.t_start) {
            kept.push_back(e);
        }
    }
    return EventStream(K.width, K.height, std::move(kept));
}

} // namespace

Json
synth_dataset(const SynthConfig &cfg, const std::filesystem::path &out) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    namespace fs = std::filesystem;
    for (const char *d : {"views", "events", "gt", "init"}) {
        fs::create_directories(out / d);
    }

    CameraIntrinsics K;
    K.width  = cfg.width;
    K.height = cfg.height;
    K.fx = K.fy = cfg.focal;
    K.cx        = 0.5 * (cfg.width - 1);
    K.cy        = 0.5 * (cfg.height - 1);

    Scene gt = cfg.scene_path.empty() ? random_gt_scene(cfg, rng) : load_scene(cfg.scene_path);
    gt.validate();
    save_scene(out / "gt" / "scene.json", gt);

    EventConfig ecfg;
    ecfg.theta   = cfg.theta;
    ecfg.log_eps = cfg.log_eps;

    Json manifest;
    manifest["version"]    = kManifestVersion;
    manifest["intrinsics"] = intrinsics_to_json(K);
    manifest["theta"]      = cfg.theta;
    manifest["log_eps"]    = cfg.log_eps;

    Json obs_json = Json::array(), gt_traj = Json::array(), sharp_json = Json::array();
    std::vector<ExposureTrajectory> init_trajs;
    for (int v = 0; v < cfg.views; ++v) {
        const Pose                             mid = random_view(cfg, rng);
        std::uniform_real_distribution<double> mag(0.5, 1.0);
        const Eigen::Vector3d                  w = deg2rad(cfg.shake_rotation_deg) * mag(rng) * random_unit(rng);
        const Eigen::Vector3d t = cfg.shake_translation * cfg.extent * mag(rng) * random_unit(rng);
        const Twist           half(0.5 * w, 0.5 * t);
        const double          t0 = v * cfg.view_spacing;
        const ExposureTrajectory traj(se3_exp(half * -1.0) * mid, se3_exp(half) * mid, t0, t0 + cfg.exposure);

        const BlurRender br = render_blurred(gt, traj, cfg.dense_frames, K);
        const EventStream events = exposure_events(gt, traj, br, cfg, K, ecfg);

        const auto blur_pfm  = fs::path("views") / numbered("blur_%04d.pfm", v);
        const auto blur_png  = fs::path("views") / numbered("blur_%04d.png", v);
        const auto ev_path   = fs::path("events") / numbered("view_%04d.evt", v);
        const auto sharp_pfm = fs::path("gt") / numbered("sharp_%04d.pfm", v);
        write_pfm(out / blur_pfm, br.blurred);
        write_png(out / blur_png, br.blurred);
        write_events_binary(out / ev_path, events);
        write_pfm(out / sharp_pfm, br.latents[br.latents.size() / 2]);
        if (cfg.store_frames) {
            const auto dir = out / "frames" / numbered("view_%04d", v);
            fs::create_directories(dir);
            for (size_t k = 0; k < br.latents.size(); ++k) {
                write_pfm(dir / numbered("frame_%04d.pfm", static_cast<int>(k)), br.latents[k]);
            }
        }

        const double       rot   = deg2rad(cfg.init_rotation_deg);
        const double       shift = cfg.init_translation * cfg.extent;
        ExposureTrajectory init  = traj;
        init.pose_start          = perturb(traj.pose_start, rot, shift, rng);
        init.pose_end            = perturb(traj.pose_end, rot, shift, rng);
        init_trajs.push_back(init);

        Json o;
        o["blur"]       = rel(blur_pfm);
        o["blur_png"]   = rel(blur_png);
        o["events"]     = rel(ev_path);
        o["trajectory"] = trajectory_to_json(init);
        obs_json.push_back(o);
        gt_traj.push_back(trajectory_to_json(traj));
        sharp_json.push_back(rel(sharp_pfm));
    }
    write_json_file(out / "gt" / "trajectories.json", gt_traj);

    Json eval_json = Json::array();
    for (int e = 0; e < cfg.eval_views; ++e) {
        const Pose pose = random_view(cfg, rng);
        const auto path = fs::path("gt") / numbered("eval_%04d.pfm", e);
        write_pfm(out / path, render(gt, pose, K));
        eval_json.push_back({{"pose", pose_to_json(pose)}, {"image", rel(path)}});
    }

    // initial scene: noisy ground-truth centres, gray, isotropic
    std::normal_distribution<double> noise(0.0, cfg.init_position_noise);
    std::vector<Eigen::Vector3d>     points;
    for (const auto &g : gt.gaussians) {
        points.push_back(g.position + Eigen::Vector3d(noise(rng), noise(rng), noise(rng)));
    }
    SceneInitOptions init_opts;
    init_opts.sh_degree  = gt.sh_degree;
    init_opts.background = gt.background;
    save_scene(out / "init" / "scene.json", init_scene(points, init_opts));

    manifest["observations"] = obs_json;
    manifest["eval_views"]   = eval_json;
    manifest["init_scene"]   = "init/scene.json";
    manifest["synthetic"]    = {
        {"scene", "gt/scene.json"},
        {"trajectories", "gt/trajectories.json"},
        {"sharp", sharp_json},
        {"seed", cfg.seed},
        {"n_latent", cfg.n_latent},
        {"dense_frames", cfg.dense_frames},
        {"event_lead_in", cfg.event_lead_in},
        {"shake_rotation_deg", cfg.shake_rotation_deg},
        {"shake_translation", cfg.shake_translation},
        {"init_rotation_deg", cfg.init_rotation_deg},
        {"init_translation", cfg.init_translation},
        {"init_position_noise", cfg.init_position_noise},
        {"extent", cfg.extent},
        {"stored_frames", cfg.store_frames},
    };
    write_json_file(out / "manifest.json", manifest);
    return manifest;
}

namespace {

/// Runs `fn`, prefixing any failure with the manifest field it concerns.
template <typename F>
auto
field(const std::string &where, F &&fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::exception &e) {
        throw std::runtime_error(where + ": " + e.what());
    }
}

std::filesystem::path
existing(const std::filesystem::path &root, const Json &j) {
    const auto p = root / j.get<std::string>();
    if (!std::filesystem::exists(p)) {
        throw std::runtime_error("missing file " + p.string());
    }
    return p;
}

} // namespace

Dataset
load_dataset(const std::filesystem::path &root, const LoadOptions &opts) {
    Dataset ds;
    ds.root         = root;
    const auto mpath = root / "manifest.json";
    const std::string m = mpath.string();
    ds.manifest         = field(m, [&] { return read_json_file(mpath); });
    const Json &j       = ds.manifest;

    field(m + ": version", [&] {
        if (j.at("version").get<int>() != kManifestVersion) {
            throw std::runtime_error("unsupported version " + j.at("version").dump());
        }
    });
    ds.intrinsics = field(m + ": intrinsics", [&] {
        auto K = intrinsics_from_json(j.at("intrinsics"));
        K.validate();
        return K;
    });
    ds.theta   = field(m + ": theta", [&] { return j.at("theta").get<double>(); });
    ds.log_eps = field(m + ": log_eps", [&] { return j.at("log_eps").get<double>(); });
    if (!(ds.theta > 0.0) || !(ds.log_eps > 0.0)) {
        throw std::runtime_error(m + ": theta and log_eps must be > 0");
    }
    ds.init_scene = field(m + ": init_scene", [&] { return load_scene(existing(root, j.at("init_scene"))); });
    ds.init_scene.validate();

    EventConfig ecfg;
    ecfg.theta   = opts.theta.value_or(ds.theta);
    ecfg.log_eps = ds.log_eps;

    const Json &obs = field(m + ": observations", [&]() -> const Json & {
        const Json &o = j.at("observations");
        if (!o.is_array() || o.empty()) {
            throw std::runtime_error("expected a non-empty array");
        }
        return o;
    });
    for (size_t i = 0; i < obs.size(); ++i) {
        const std::string where = m + ": observations[" + std::to_string(i) + "]";
        Observation       o;
        o.intrinsics = ds.intrinsics;
        o.blurred    = field(where + ".blur", [&] { return read_image(existing(root, obs[i].at("blur"))); });
        o.events     = field(where + ".events", [&] { return read_events_binary(existing(root, obs[i].at("events"))); });
        o.trajectory = field(where + ".trajectory", [&] { return trajectory_from_json(obs[i].at("trajectory")); });
        field(where, [&] { o.validate(); });
        o.edi_target = edi_mid_exposure(o.blurred, o.events, o.trajectory, ecfg);
        ds.observations.push_back(std::move(o));
    }

    const Json &ev = field(m + ": eval_views", [&]() -> const Json & { return j.at("eval_views"); });
    for (size_t i = 0; i < ev.size(); ++i) {
        const std::string where = m + ": eval_views[" + std::to_string(i) + "]";
        EvalView          v;
        v.pose  = field(where + ".pose", [&] { return pose_from_json(ev[i].at("pose")); });
        v.image = field(where + ".image", [&] { return read_image(existing(root, ev[i].at("image"))); });
        if (v.image.width() != ds.intrinsics.width || v.image.height() != ds.intrinsics.height) {
            throw std::runtime_error(where + ".image: size does not match intrinsics");
        }
        for (const auto &o : ds.observations) {
            for (const Pose *p : {&o.trajectory.pose_start, &o.trajectory.pose_end}) {
                if (rotation_angle_between(*p, v.pose) < 1e-9 && (p->center() - v.pose.center()).norm() < 1e-9) {
                    throw std::runtime_error(where + ".pose: coincides with a training pose");
                }
            }
        }
        ds.eval_views.push_back(std::move(v));
    }

    if (opts.load_ground_truth && j.contains("synthetic")) {
        const Json &s = j.at("synthetic");
        ds.gt_scene   = field(m + ": synthetic.scene", [&] { return load_scene(existing(root, s.at("scene"))); });
        const Json trajs =
            field(m + ": synthetic.trajectories", [&] { return read_json_file(existing(root, s.at("trajectories"))); });
        for (const auto &t : trajs) {
            ds.gt_trajectories.push_back(trajectory_from_json(t));
        }
        for (size_t i = 0; i < s.at("sharp").size(); ++i) {
            ds.gt_sharp.push_back(field(m + ": synthetic.sharp[" + std::to_string(i) + "]",
                                        [&] { return read_image(existing(root, s.at("sharp")[i])); }));
        }
        if (ds.gt_trajectories.size() != ds.observations.size() || ds.gt_sharp.size() != ds.observations.size()) {
            throw std::runtime_error(m + ": synthetic ground truth does not match the observation count");
        }
    }
    return ds;
}

std::vector<ViewStats>
inspect_dataset(const Dataset &ds) {
    std::vector<ViewStats> out;
    for (size_t i = 0; i < ds.observations.size(); ++i) {
        const auto &o = ds.observations[i];
        ViewStats   s;
        s.events = o.events.size();
        for (const auto &e : o.events.events()) {
            s.positive_events += e.p > 0 ? 1 : 0;
        }
        if (i < ds.gt_sharp.size()) {
            s.blur_l1 = l1(o.blurred, ds.gt_sharp[i]);
        }
        s.rotation_deg  = rotation_angle_between(o.trajectory.pose_start, o.trajectory.pose_end) * 180.0 / kPi;
        s.translation_m = (o.trajectory.pose_start.center() - o.trajectory.pose_end.center()).norm();
        out.push_back(s);
    }
    return out;
}

} // namespace evsplat
