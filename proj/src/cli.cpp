// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/cli.hpp"

#include "evsplat/dataset.hpp"
#include "evsplat/edi.hpp"
#include "evsplat/image_io.hpp"
#include "evsplat/json_io.hpp"
#include "evsplat/trainer.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

namespace evsplat {

namespace {

namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string
fmt(const char *f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    SynthConfig cfg;
    fs::path    out;
    int         size = -1;
};

void
add_synth(CLI::App &app, SynthArgs &a) {
    auto *s = app.add_subcommand("synth", "Generate a synthetic blurred/event dataset");
    auto &c = a.cfg;
    s->add_option("--out", a.out, "Output directory")->required();
    s->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
    s->add_option("--views", c.views, "Training views")->capture_default_str();
    s->add_option("--eval-views", c.eval_views, "Held-out views")->capture_default_str();
    s->add_option("--gaussians", c.gaussians, "Ground-truth primitives")->capture_default_str();
    s->add_option("--size", a.size, "Square image size (sets width and height)");
    s->add_option("--width", c.width)->capture_default_str();
    s->add_option("--height", c.height)->capture_default_str();
    s->add_option("--focal", c.focal, "Focal length in pixels")->capture_default_str();
    s->add_option("--sh-degree", c.sh_degree)->capture_default_str();
    s->add_option("--shake-deg", c.shake_rotation_deg, "Max start-to-end rotation")->capture_default_str();
    s->add_option("--shake-trans", c.shake_translation, "Max start-to-end translation, fraction of extent")
        ->capture_default_str();
    s->add_option("--exposure", c.exposure, "Exposure time in seconds")->capture_default_str();
    s->add_option("--dense-frames", c.dense_frames, "Sharp frames averaged per blurred image (odd, >= 51)")
        ->capture_default_str();
    s->add_option("--theta", c.theta, "Event contrast threshold")->capture_default_str();
    s->add_option("--log-eps", c.log_eps)->capture_default_str();
    s->add_option("--event-lead-in", c.event_lead_in, "Sensor run-up before each exposure, in exposures")
        ->capture_default_str();
    s->add_option("--init-rot-deg", c.init_rotation_deg, "Rotation perturbation of the initial poses")
        ->capture_default_str();
    s->add_option("--init-trans", c.init_translation, "Translation perturbation, fraction of extent")
        ->capture_default_str();
    s->add_option("--init-noise", c.init_position_noise, "Position noise of the initial scene (m)")
        ->capture_default_str();
    s->add_option("--scene", c.scene_path, "Ground-truth scene JSON instead of random primitives")
        ->check(CLI::ExistingFile);
    s->add_flag("--store-frames", c.store_frames, "Also write the dense sharp frames");
}

int
run_synth(SynthArgs &a, std::ostream &out) {
    if (a.size > 0) {
        a.cfg.width = a.cfg.height = a.size;
    }
    const Json m = synth_dataset(a.cfg, a.out);
    out << "wrote " << m.at("observations").size() << " views and " << m.at("eval_views").size()
        << " eval views to " << a.out.string() << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------ edi

struct EdiArgs {
    fs::path    blur, events, out;
    double      t_start = 0.0, t_end = 0.0;
    std::string t_ref   = "mid";
    double      theta   = 0.2;
    int         bins    = kDefaultEdiBins;
};

void
add_edi(CLI::App &app, EdiArgs &a) {
    auto *s = app.add_subcommand("edi", "Deblur one image with its event stream");
    s->add_option("--blur", a.blur, "Blurred image (.pfm or .png)")->required()->check(CLI::ExistingFile);
    s->add_option("--events", a.events, "Event file (.evt binary or .csv)")->required()->check(CLI::ExistingFile);
    s->add_option("--t-start", a.t_start, "Exposure start (s)")->required();
    s->add_option("--t-end", a.t_end, "Exposure end (s)")->required();
    s->add_option("--t-ref", a.t_ref, "Reference time: 'mid' or seconds")->capture_default_str();
    s->add_option("--theta", a.theta, "Contrast threshold")->capture_default_str();
    s->add_option("--bins", a.bins, "Quadrature bins")->capture_default_str();
    s->add_option("--out", a.out, "Output image (.pfm or .png)")->required();
}

int
run_edi(const EdiArgs &a, std::ostream &out) {
    EdiRequest r;
    r.blurred = read_image(a.blur);
    r.events  = a.events.extension() == ".csv" ? read_events_csv(a.events, r.blurred.width(), r.blurred.height())
                                               : read_events_binary(a.events);
    r.t_start = a.t_start;
    r.t_end   = a.t_end;
    if (a.t_ref == "mid") {
        r.t_ref = 0.5 * (a.t_start + a.t_end);
    } else {
        try {
            size_t used = 0;
            r.t_ref     = std::stod(a.t_ref, &used);
            if (used != a.t_ref.size()) {
                throw std::invalid_argument("trailing characters");
            }
        } catch (const std::exception &) {
            throw std::invalid_argument("--t-ref must be 'mid' or a number, got '" + a.t_ref + "'");
        }
    }
    r.theta = a.theta;
    r.bins  = a.bins;
    write_image(a.out, edi_deblur(r));
    out << "deblurred " << r.events.size() << " events into " << a.out.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    fs::path                 data, out, config;
    std::vector<std::string> sets;
    int                      iters     = -1;
    std::optional<uint64_t>  seed;
    std::optional<double>    theta;
    std::optional<int>       threads;
    bool                     resume    = false;
    int                      log_every = 100;
};

void
add_train(CLI::App &app, TrainArgs &a) {
    auto *s = app.add_subcommand("train", "Jointly optimise the scene and exposure trajectories");
    s->add_option("--data", a.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    s->add_option("--out", a.out, "Run directory (log, checkpoints)")->required();
    s->add_option("--config", a.config, "key = value config file")->check(CLI::ExistingFile);
    s->add_option("--set", a.sets, "Config override key=value (repeatable)");
    s->add_option("--iters", a.iters, "Iterations (overrides the config)");
    s->add_option("--seed", a.seed, "RNG seed (overrides the config)");
    s->add_option("--theta", a.theta, "Contrast threshold for the losses and EDI targets");
    s->add_option("--threads", a.threads, "Render threads");
    s->add_option("--log-every", a.log_every, "Print a progress line every N iterations")->capture_default_str();
    s->add_flag("--resume", a.resume, "Continue from the latest checkpoint in --out");
}

double
mean_rotation_error(const std::vector<Observation> &obs, const std::vector<ExposureTrajectory> &gt) {
    double sum = 0.0;
    for (size_t i = 0; i < obs.size(); ++i) {
        sum += pose_error(obs[i].trajectory, gt[i]).rotation_deg;
    }
    return sum / static_cast<double>(obs.size());
}

int
run_train(const TrainArgs &a, std::ostream &out) {
    TrainConfig cfg;
    cfg.weights.theta   = kNaN; // unset: take the dataset's values
    cfg.weights.log_eps = kNaN;
    if (!a.config.empty()) {
        cfg = load_config_file(a.config, cfg);
    }
    for (const auto &kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        }
        apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (a.iters >= 0) {
        cfg.iterations = a.iters;
    }
    if (a.seed) {
        cfg.seed = *a.seed;
    }
    if (a.theta) {
        cfg.weights.theta = *a.theta;
    }
    if (a.threads) {
        cfg.threads = *a.threads;
    }

    LoadOptions lo;
    if (!std::isnan(cfg.weights.theta)) {
        lo.theta = cfg.weights.theta;
    }
    const Dataset ds = load_dataset(a.data, lo);
    if (std::isnan(cfg.weights.theta)) {
        cfg.weights.theta = ds.theta;
    }
    if (std::isnan(cfg.weights.log_eps)) {
        cfg.weights.log_eps = ds.log_eps;
    }
    cfg.validate();

    TrainState st(ds.init_scene, ds.observations, cfg.seed);
    if (a.resume) {
        const auto ck = latest_checkpoint(a.out);
        if (!ck.empty()) {
            load_checkpoint(ck, st);
            out << "resumed from " << ck.string() << " at iteration " << st.iteration << "\n";
        }
    }
    TrainRunOptions opts;
    opts.output_dir = a.out;
    opts.on_step    = [&](int it, const LossReport &r) {
        if (a.log_every > 0 && (it % a.log_every == 0 || it + 1 == cfg.iterations)) {
            out << "iter " << it << " total " << fmt("%.6f", r.total) << " blur " << fmt("%.6f", r.blur) << " event "
                << fmt("%.6f", r.event) << " edi " << fmt("%.6f", r.edi) << "\n";
        }
    };
    train(st, cfg, opts);

    RenderOptions ro;
    ro.threads = cfg.threads;
    Json summary;
    summary["iterations"] = st.iteration;
    if (!ds.eval_views.empty()) {
        const EvalReport e   = evaluate(st.scene, ds.eval_views, ds.intrinsics, ro);
        summary["mean_psnr"] = e.mean_psnr;
        summary["mean_ssim"] = e.mean_ssim;
        out << "eval mean PSNR " << fmt("%.3f", e.mean_psnr) << " dB, SSIM " << fmt("%.4f", e.mean_ssim) << "\n";
    }
    if (ds.gt_trajectories.size() == st.observations.size()) {
        const double r                 = mean_rotation_error(st.observations, ds.gt_trajectories);
        summary["mean_rotation_error"] = r;
        out << "mean pose rotation error " << fmt("%.4f", r) << " deg\n";
    }
    write_json_file(a.out / "summary.json", summary);
    return kExitOk;
}

// --------------------------------------------------------------- render

struct RenderArgs {
    fs::path           checkpoint, scene, data, pose, out;
    std::optional<int> eval_view, train_view;
    int                size    = 64;
    double             focal   = 64.0;
    int                threads = 1;
};

void
add_render(CLI::App &app, RenderArgs &a) {
    auto *s  = app.add_subcommand("render", "Render a sharp view from a checkpoint or scene file");
    auto *ck = s->add_option("--checkpoint", a.checkpoint, "Checkpoint directory")->check(CLI::ExistingDirectory);
    auto *sc = s->add_option("--scene", a.scene, "Scene JSON")->check(CLI::ExistingFile);
    ck->excludes(sc);
    s->add_option("--data", a.data, "Dataset directory (intrinsics and eval poses)")->check(CLI::ExistingDirectory);
    auto *p  = s->add_option("--pose", a.pose, "Pose JSON {q, t}")->check(CLI::ExistingFile);
    auto *ev = s->add_option("--eval-view", a.eval_view, "Use the pose of eval view i (needs --data)");
    auto *tv = s->add_option("--train-view", a.train_view, "Mid-exposure pose of training view i");
    p->excludes(ev)->excludes(tv);
    ev->excludes(tv);
    s->add_option("--size", a.size, "Square image size without --data")->capture_default_str();
    s->add_option("--focal", a.focal, "Focal length without --data")->capture_default_str();
    s->add_option("--threads", a.threads)->capture_default_str();
    s->add_option("--out", a.out, "Output image (.pfm or .png)")->required();
}

int
run_render(const RenderArgs &a, std::ostream &out) {
    if (a.checkpoint.empty() && a.scene.empty()) {
        throw std::invalid_argument("render needs --checkpoint or --scene");
    }
    const Scene scene = load_scene(a.checkpoint.empty() ? a.scene : a.checkpoint / "scene.json");

    Json manifest;
    if (!a.data.empty()) {
        manifest = read_json_file(a.data / "manifest.json");
    }
    CameraIntrinsics K;
    if (!manifest.is_null()) {
        K = intrinsics_from_json(manifest.at("intrinsics"));
    } else {
        K.width = K.height = a.size;
        K.fx = K.fy = a.focal;
        K.cx = K.cy = 0.5 * (a.size - 1);
    }
    K.validate();

    Pose pose;
    if (!a.pose.empty()) {
        pose = pose_from_json(read_json_file(a.pose));
    } else if (a.eval_view) {
        if (manifest.is_null()) {
            throw std::invalid_argument("--eval-view needs --data");
        }
        pose = pose_from_json(manifest.at("eval_views").at(static_cast<size_t>(*a.eval_view)).at("pose"));
    } else if (a.train_view) {
        Json trajs;
        if (!a.checkpoint.empty()) {
            trajs = read_json_file(a.checkpoint / "trajectories.json");
        } else if (!manifest.is_null()) {
            trajs = Json::array();
            for (const auto &o : manifest.at("observations")) {
                trajs.push_back(o.at("trajectory"));
            }
        } else {
            throw std::invalid_argument("--train-view needs --checkpoint or --data");
        }
        const auto traj = trajectory_from_json(trajs.at(static_cast<size_t>(*a.train_view)));
        pose            = interpolate_pose(traj, traj.mid_time());
    }
    RenderOptions ro;
    ro.threads = a.threads;
    write_image(a.out, render(scene, pose, K, ro));
    out << "rendered " << K.width << "x" << K.height << " to " << a.out.string() << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------- eval

struct EvalArgs {
    fs::path data, checkpoint, run, json;
    int      threads = 1;
};

void
add_eval(CLI::App &app, EvalArgs &a) {
    auto *s = app.add_subcommand("eval", "PSNR/SSIM on the eval views (and pose error when ground truth exists)");
    s->add_option("--data", a.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    auto *ck = s->add_option("--checkpoint", a.checkpoint, "Checkpoint directory")->check(CLI::ExistingDirectory);
    auto *rn = s->add_option("--run", a.run, "Run directory; its latest checkpoint is used")
                   ->check(CLI::ExistingDirectory);
    ck->excludes(rn);
    s->add_option("--json", a.json, "Also write the metrics as JSON here");
    s->add_option("--threads", a.threads)->capture_default_str();
}

Json
finite_or_null(double v) {
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

int
run_eval(const EvalArgs &a, std::ostream &out) {
    fs::path ck = a.checkpoint;
    if (!a.run.empty()) {
        ck = latest_checkpoint(a.run);
        if (ck.empty()) {
            throw std::runtime_error("no checkpoints under " + a.run.string());
        }
    }
    LoadOptions lo;
    Dataset     ds = load_dataset(a.data, lo);
    Scene       scene = ds.init_scene;
    std::vector<ExposureTrajectory> trajs;
    for (const auto &o : ds.observations) {
        trajs.push_back(o.trajectory);
    }
    if (!ck.empty()) {
        scene            = load_scene(ck / "scene.json");
        const Json saved = read_json_file(ck / "trajectories.json");
        if (saved.size() != trajs.size()) {
            throw std::runtime_error((ck / "trajectories.json").string() + ": trajectory count does not match the dataset");
        }
        for (size_t i = 0; i < trajs.size(); ++i) {
            trajs[i] = trajectory_from_json(saved[i]);
        }
    }
    RenderOptions ro;
    ro.threads         = a.threads;
    const EvalReport e = evaluate(scene, ds.eval_views, ds.intrinsics, ro);

    Json j;
    j["source"] = ck.empty() ? std::string("initialization") : ck.string();
    j["views"]  = Json::array();
    out << (ck.empty() ? std::string("initialization") : ck.string()) << "\n";
    out << "view      psnr     ssim\n";
    for (size_t i = 0; i < e.psnr.size(); ++i) {
        out << fmt("%4.0f", static_cast<double>(i)) << fmt("  %8.3f", e.psnr[i]) << fmt("  %7.4f", e.ssim[i]) << "\n";
        j["views"].push_back({{"psnr", finite_or_null(e.psnr[i])}, {"ssim", e.ssim[i]}});
    }
    out << "mean" << fmt("  %8.3f", e.mean_psnr) << fmt("  %7.4f", e.mean_ssim) << "\n";
    j["mean_psnr"] = finite_or_null(e.mean_psnr);
    j["mean_ssim"] = e.mean_ssim;

    if (ds.gt_trajectories.size() == trajs.size()) {
        double rot = 0.0, trans = 0.0;
        Json   pe  = Json::array();
        for (size_t i = 0; i < trajs.size(); ++i) {
            const PoseError err = pose_error(trajs[i], ds.gt_trajectories[i]);
            rot += err.rotation_deg;
            trans += err.translation_m;
            pe.push_back({{"rotation_deg", err.rotation_deg}, {"translation_m", err.translation_m}});
        }
        rot /= static_cast<double>(trajs.size());
        trans /= static_cast<double>(trajs.size());
        j["pose_error"]          = pe;
        j["mean_rotation_deg"]   = rot;
        j["mean_translation_m"]  = trans;
        out << "pose error: rotation " << fmt("%.4f", rot) << " deg, translation " << fmt("%.5f", trans) << " m\n";
    }
    if (!a.json.empty()) {
        write_json_file(a.json, j);
    }
    return kExitOk;
}

// -------------------------------------------------------------- inspect

struct InspectArgs {
    fs::path data, json;
};

void
add_inspect(CLI::App &app, InspectArgs &a) {
    auto *s = app.add_subcommand("inspect", "Dataset statistics");
    s->add_option("--data", a.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    s->add_option("--json", a.json, "Also write the statistics as JSON here");
}

int
run_inspect(const InspectArgs &a, std::ostream &out) {
    const Dataset ds    = load_dataset(a.data);
    const auto    stats = inspect_dataset(ds);
    Json          j     = Json::array();
    out << ds.observations.size() << " views, " << ds.eval_views.size() << " eval views, " << ds.intrinsics.width
        << "x" << ds.intrinsics.height << ", theta " << ds.theta << "\n";
    out << "view    events  positive   blur_l1   rot_deg   trans_m\n";
    size_t total = 0;
    for (size_t i = 0; i < stats.size(); ++i) {
        const auto &s = stats[i];
        total += s.events;
        char line[128];
        std::snprintf(line, sizeof(line), "%4zu  %8zu  %8zu  %8.5f  %8.4f  %8.5f\n", i, s.events, s.positive_events,
                      s.blur_l1, s.rotation_deg, s.translation_m);
        out << line;
        j.push_back({{"events", s.events},
                     {"positive_events", s.positive_events},
                     {"blur_l1", s.blur_l1},
                     {"rotation_deg", s.rotation_deg},
                     {"translation_m", s.translation_m}});
    }
    out << "total events " << total << "\n";
    if (!a.json.empty()) {
        write_json_file(a.json, j);
    }
    return kExitOk;
}

} // namespace

int
run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Event-aided deblurring for Gaussian splatting", "evsplat"};
    app.require_subcommand(1);
    SynthArgs   synth;
    EdiArgs     edi;
    TrainArgs   tr;
    RenderArgs  rd;
    EvalArgs    ev;
    InspectArgs in;
    add_synth(app, synth);
    add_edi(app, edi);
    add_train(app, tr);
    add_render(app, rd);
    add_eval(app, ev);
    add_inspect(app, in);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "usage error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kExitUsage;
    }

    try {
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "synth") {
            return run_synth(synth, out);
        }
        if (name == "edi") {
            return run_edi(edi, out);
        }
        if (name == "train") {
            return run_train(tr, out);
        }
        if (name == "render") {
            return run_render(rd, out);
        }
        if (name == "eval") {
            return run_eval(ev, out);
        }
        return run_inspect(in, out);
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
}

} // namespace evsplat
