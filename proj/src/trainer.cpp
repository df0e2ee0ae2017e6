// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/trainer.hpp"

#include "evsplat/json_io.hpp"
#include "evsplat/sh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace evsplat {

// ---------------------------------------------------------------- observation

void
Observation::validate(double guard) const {
    if (blurred.width() != intrinsics.width || blurred.height() != intrinsics.height) {
        throw std::invalid_argument("observation: blurred image is " + std::to_string(blurred.width()) + "x" +
                                    std::to_string(blurred.height()) + " but intrinsics say " +
                                    std::to_string(intrinsics.width) + "x" + std::to_string(intrinsics.height));
    }
    if (events.width() != intrinsics.width || events.height() != intrinsics.height) {
        throw std::invalid_argument("observation: event sensor size does not match intrinsics");
    }
    if (!edi_target.empty() && !edi_target.same_shape(blurred)) {
        throw std::invalid_argument("observation: EDI target shape differs from the blurred image");
    }
    if (!(trajectory.t_start < trajectory.t_end)) {
        throw std::invalid_argument("observation: empty exposure window");
    }
    if (!events.empty()) {
        const double lo = events.events().front().t, hi = events.events().back().t;
        if (lo < trajectory.t_start - guard || hi > trajectory.t_end + guard) {
            throw std::invalid_argument("observation: events span [" + std::to_string(lo) + ", " +
                                        std::to_string(hi) + "] outside the exposure window");
        }
    }
}

// --------------------------------------------------------------------- config

void
TrainConfig::validate() const {
    if (n_latent < 1 || n_latent % 2 == 0) {
        throw std::invalid_argument("TrainConfig: n_latent must be odd and >= 1, got " + std::to_string(n_latent));
    }
    if (iterations < 0) {
        throw std::invalid_argument("TrainConfig: iterations must be >= 0");
    }
    for (double r : {lr.position_init, lr.position_final, lr.log_scale, lr.rotation, lr.opacity, lr.sh,
                     lr.pose_init, lr.pose_final}) {
        if (!(r >= 0.0) || !std::isfinite(r)) {
            throw std::invalid_argument("TrainConfig: learning rates must be finite and >= 0");
        }
    }
    if ((lr.position_init > 0.0) != (lr.position_final > 0.0) || (lr.pose_init > 0.0) != (lr.pose_final > 0.0)) {
        throw std::invalid_argument("TrainConfig: a decaying rate must be zero at both ends or at neither");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0)) {
        throw std::invalid_argument("TrainConfig: bad Adam hyperparameters");
    }
    if (pose_warmup < 0 || checkpoint_every < 0 || threads < 1) {
        throw std::invalid_argument("TrainConfig: pose_warmup, checkpoint_every must be >= 0 and threads >= 1");
    }
    weights.validate();
}

namespace {

double
exp_decay(double init, double final_, int iteration, int total) {
    if (init == 0.0) {
        return 0.0;
    }
    const double s = total > 0 ? std::clamp(static_cast<double>(iteration) / total, 0.0, 1.0) : 0.0;
    return std::exp((1.0 - s) * std::log(init) + s * std::log(final_));
}

std::string
format_double(double v) {
    char       buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

template <typename T>
T
parse_number(const std::string &key, const std::string &value) {
    T          out{};
    const auto r = std::from_chars(value.data(), value.data() + value.size(), out);
    if (r.ec != std::errc{} || r.ptr != value.data() + value.size()) {
        throw std::invalid_argument("config: bad value '" + value + "' for key '" + key + "'");
    }
    return out;
}

std::string
trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

double
TrainConfig::position_lr(int iteration) const {
    return exp_decay(lr.position_init, lr.position_final, iteration, iterations);
}

double
TrainConfig::pose_lr(int iteration) const {
    if (iteration < pose_warmup) {
        return 0.0;
    }
    return exp_decay(lr.pose_init, lr.pose_final, iteration, iterations);
}

std::map<std::string, std::string>
config_to_map(const TrainConfig &c) {
    return {
        {"n_latent", std::to_string(c.n_latent)},
        {"iterations", std::to_string(c.iterations)},
        {"seed", std::to_string(c.seed)},
        {"lr_position_init", format_double(c.lr.position_init)},
        {"lr_position_final", format_double(c.lr.position_final)},
        {"lr_log_scale", format_double(c.lr.log_scale)},
        {"lr_rotation", format_double(c.lr.rotation)},
        {"lr_opacity", format_double(c.lr.opacity)},
        {"lr_sh", format_double(c.lr.sh)},
        {"lr_pose_init", format_double(c.lr.pose_init)},
        {"lr_pose_final", format_double(c.lr.pose_final)},
        {"adam_beta1", format_double(c.adam_beta1)},
        {"adam_beta2", format_double(c.adam_beta2)},
        {"adam_eps", format_double(c.adam_eps)},
        {"lambda_blur", format_double(c.weights.lambda_blur)},
        {"lambda_ev", format_double(c.weights.lambda_ev)},
        {"lambda_edi", format_double(c.weights.lambda_edi)},
        {"lambda_ssim", format_double(c.weights.lambda_ssim)},
        {"theta", format_double(c.weights.theta)},
        {"log_eps", format_double(c.weights.log_eps)},
        {"pose_warmup", std::to_string(c.pose_warmup)},
        {"checkpoint_every", std::to_string(c.checkpoint_every)},
        {"threads", std::to_string(c.threads)},
    };
}

void
apply_config_value(TrainConfig &c, const std::string &key, const std::string &value) {
    const std::map<std::string, double *> reals = {
        {"lr_position_init", &c.lr.position_init}, {"lr_position_final", &c.lr.position_final},
        {"lr_log_scale", &c.lr.log_scale},         {"lr_rotation", &c.lr.rotation},
        {"lr_opacity", &c.lr.opacity},             {"lr_sh", &c.lr.sh},
        {"lr_pose_init", &c.lr.pose_init},         {"lr_pose_final", &c.lr.pose_final},
        {"adam_beta1", &c.adam_beta1},             {"adam_beta2", &c.adam_beta2},
        {"adam_eps", &c.adam_eps},                 {"lambda_blur", &c.weights.lambda_blur},
        {"lambda_ev", &c.weights.lambda_ev},       {"lambda_edi", &c.weights.lambda_edi},
        {"lambda_ssim", &c.weights.lambda_ssim},   {"theta", &c.weights.theta},
        {"log_eps", &c.weights.log_eps},
    };
    const std::map<std::string, int *> ints = {
        {"n_latent", &c.n_latent},
        {"iterations", &c.iterations},
        {"pose_warmup", &c.pose_warmup},
        {"checkpoint_every", &c.checkpoint_every},
        {"threads", &c.threads},
    };
    if (auto it = reals.find(key); it != reals.end()) {
        *it->second = parse_number<double>(key, value);
    } else if (auto jt = ints.find(key); jt != ints.end()) {
        *jt->second = parse_number<int>(key, value);
    } else if (key == "seed") {
        c.seed = parse_number<uint64_t>(key, value);
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

TrainConfig
parse_config_text(const std::string &text, TrainConfig base) {
    std::istringstream in(text);
    std::string        line;
    int                lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        }
        apply_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

TrainConfig
load_config_file(const std::filesystem::path &path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_text(ss.str(), base);
    } catch (const std::invalid_argument &e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::string
config_to_text(const TrainConfig &cfg) {
    std::string out;
    for (const auto &[k, v] : config_to_map(cfg)) {
        out += k + " = " + v + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------- adam

int
params_per_gaussian(int sh_degree) {
    return 11 + 3 * sh_coeff_count(sh_degree);
}

void
AdamState::resize(const Scene &scene, size_t observations) {
    const size_t n = scene.size() * static_cast<size_t>(params_per_gaussian(scene.sh_degree));
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    step = 0;
    poses.assign(observations, PoseMoments{});
}

bool
AdamState::all_finite() const {
    auto finite = [](double x) { return std::isfinite(x); };
    if (!std::all_of(m.begin(), m.end(), finite) || !std::all_of(v.begin(), v.end(), finite)) {
        return false;
    }
    for (const auto &p : poses) {
        if (!std::all_of(p.m.begin(), p.m.end(), finite) || !std::all_of(p.v.begin(), p.v.end(), finite)) {
            return false;
        }
    }
    return true;
}

TrainState::TrainState(Scene s, std::vector<Observation> obs, uint64_t seed)
    : scene(std::move(s)), observations(std::move(obs)), rng(seed) {
    scene.validate();
    if (observations.empty()) {
        throw std::invalid_argument("TrainState: no observations");
    }
    for (size_t i = 0; i < observations.size(); ++i) {
        try {
            observations[i].validate();
        } catch (const std::exception &e) {
            throw std::invalid_argument("observation " + std::to_string(i) + ": " + e.what());
        }
    }
    adam.resize(scene, observations.size());
}

namespace {

void
adam_update(double &param, double &m, double &v, double g, double lr, double bc1, double bc2, const TrainConfig &cfg) {
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g * g;
    if (lr > 0.0) {
        param -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
    }
}

[[noreturn]] void
diverged(TrainState &state, int obs, const LossReport &r, const std::string &what) {
    std::ostringstream msg;
    msg << "training diverged at iteration " << state.iteration << " on observation " << obs << " (" << what
        << "): total=" << r.total << " blur=" << r.blur << " event=" << r.event << " edi=" << r.edi;
    throw TrainingDiverged(msg.str());
}

} // namespace

LossReport
train_step(TrainState &state, const TrainConfig &cfg) {
    cfg.validate();
    if (state.adam.poses.size() != state.observations.size() ||
        state.adam.m.size() != state.scene.size() * static_cast<size_t>(params_per_gaussian(state.scene.sh_degree))) {
        throw std::logic_error("train_step: optimiser state does not match the scene/observations");
    }
    if (state.cursor >= state.order.size()) {
        state.order.resize(state.observations.size());
        std::iota(state.order.begin(), state.order.end(), 0);
        std::shuffle(state.order.begin(), state.order.end(), state.rng);
        state.cursor = 0;
    }
    const int    oi  = state.order[state.cursor++];
    Observation &obs = state.observations[static_cast<size_t>(oi)];

    RenderOptions ropts;
    ropts.threads = cfg.threads;
    const auto br = render_blurred(state.scene, obs.trajectory, cfg.n_latent, obs.intrinsics, ropts);
    if (obs.edi_target.empty()) {
        throw std::logic_error("train_step: observation " + std::to_string(oi) + " has no cached EDI target");
    }
    LossReport report = observation_loss(br, obs.blurred, obs.events, obs.edi_target, cfg.weights, state.rng);
    if (!std::isfinite(report.total)) {
        diverged(state, oi, report, "non-finite loss");
    }
    const GradientBuffer grad =
        backward_latents(state.scene, obs.trajectory, obs.intrinsics, br.times, report.latent_adjoints, ropts);
    if (!grad.all_finite()) {
        diverged(state, oi, report, "non-finite gradient");
    }

    // Gaussian parameters
    const int    it   = state.iteration;
    const double lr_p = cfg.position_lr(it);
    auto        &ad   = state.adam;
    ++ad.step;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(ad.step));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(ad.step));
    const size_t P   = static_cast<size_t>(params_per_gaussian(state.scene.sh_degree));
    for (size_t gi = 0; gi < state.scene.size(); ++gi) {
        auto       &g  = state.scene.gaussians[gi];
        const auto &dg = grad.gaussians[gi];
        double     *m  = ad.m.data() + gi * P;
        double     *v  = ad.v.data() + gi * P;
        size_t      k  = 0;
        auto        upd = [&](double &param, double d, double lr) {
            adam_update(param, m[k], v[k], d, lr, bc1, bc2, cfg);
            ++k;
        };
        for (int a = 0; a < 3; ++a) {
            upd(g.position[a], dg.position[a], lr_p);
        }
        for (int a = 0; a < 3; ++a) {
            upd(g.log_scale[a], dg.log_scale[a], cfg.lr.log_scale);
        }
        for (int a = 0; a < 4; ++a) {
            upd(g.rotation[a], dg.rotation[a], cfg.lr.rotation);
        }
        upd(g.opacity_logit, dg.opacity_logit, cfg.lr.opacity);
        for (size_t c = 0; c < g.sh.size(); ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                upd(g.sh[c][ch], dg.sh[c][ch], cfg.lr.sh);
            }
        }
        if (cfg.lr.rotation > 0.0) {
            const double n = g.rotation.norm();
            if (n > 0.0) {
                g.rotation /= n;
            }
        }
    }

    // Endpoint poses: Adam step on the twist, applied as a left exponential.
    const double lr_pose = cfg.pose_lr(it);
    auto        &pm      = ad.poses[static_cast<size_t>(oi)];
    ++pm.step;
    const double pbc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(pm.step));
    const double pbc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(pm.step));
    Vector6d     delta[2];
    const Vector6d g_twist[2] = {grad.twist_start.vector(), grad.twist_end.vector()};
    for (int e = 0; e < 2; ++e) {
        for (int a = 0; a < 6; ++a) {
            double x = 0.0;
            adam_update(x, pm.m[static_cast<size_t>(e * 6 + a)], pm.v[static_cast<size_t>(e * 6 + a)], g_twist[e][a],
                        lr_pose, pbc1, pbc2, cfg);
            delta[e][a] = x;
        }
    }
    if (lr_pose > 0.0) {
        obs.trajectory.pose_start = se3_exp(Twist(delta[0])) * obs.trajectory.pose_start;
        obs.trajectory.pose_end   = se3_exp(Twist(delta[1])) * obs.trajectory.pose_end;
    }

    ++state.iteration;
    report.latent_adjoints.clear();
    return report;
}

// --------------------------------------------------------------------- train

std::string
log_line(int iteration, const LossReport &r) {
    Json j;
    j["iter"]  = iteration;
    j["total"] = r.total;
    j["blur"]  = r.blur;
    j["event"] = r.event;
    j["edi"]   = r.edi;
    return j.dump();
}

namespace {

std::filesystem::path
checkpoint_dir(const std::filesystem::path &out, int iteration) {
    char name[32];
    std::snprintf(name, sizeof(name), "iter_%08d", iteration);
    return out / "checkpoints" / name;
}

/// Keeps the log lines up to `iteration` so a resumed run appends cleanly.
void
truncate_log(const std::filesystem::path &log, int iteration) {
    if (!std::filesystem::exists(log)) {
        return;
    }
    std::ifstream            in(log);
    std::vector<std::string> keep;
    std::string              line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const Json j = Json::parse(line);
        if (j.at("iter").get<int>() < iteration) {
            keep.push_back(line);
        }
    }
    in.close();
    std::ofstream out(log, std::ios::trunc);
    for (const auto &l : keep) {
        out << l << '\n';
    }
}

} // namespace

std::vector<LossReport>
train(TrainState &state, const TrainConfig &cfg, const TrainRunOptions &opts) {
    cfg.validate();
    std::vector<LossReport> reports;
    std::ofstream           log;
    const bool              files = !opts.output_dir.empty();
    if (files) {
        std::filesystem::create_directories(opts.output_dir);
        const auto log_path = opts.output_dir / "train_log.jsonl";
        truncate_log(log_path, state.iteration);
        log.open(log_path, std::ios::app);
        if (!log) {
            throw std::runtime_error("cannot open " + log_path.string());
        }
    }
    while (state.iteration < cfg.iterations) {
        const int  it = state.iteration;
        LossReport r;
        try {
            r = train_step(state, cfg);
        } catch (const TrainingDiverged &) {
            if (files) {
                save_checkpoint(opts.output_dir / ("crash_iter_" + std::to_string(it)), state, cfg);
            }
            throw;
        }
        if (files) {
            log << log_line(it, r) << '\n';
        }
        if (opts.on_step) {
            opts.on_step(it, r);
        }
        reports.push_back(std::move(r));
        if (files && cfg.checkpoint_every > 0 && state.iteration % cfg.checkpoint_every == 0) {
            log.flush();
            save_checkpoint(checkpoint_dir(opts.output_dir, state.iteration), state, cfg);
        }
    }
    if (files) {
        log.flush();
        const auto final_dir = checkpoint_dir(opts.output_dir, state.iteration);
        if (!std::filesystem::exists(final_dir)) {
            save_checkpoint(final_dir, state, cfg);
        }
    }
    return reports;
}

std::filesystem::path
latest_checkpoint(const std::filesystem::path &output_dir) {
    const auto root = output_dir / "checkpoints";
    if (!std::filesystem::is_directory(root)) {
        return {};
    }
    std::filesystem::path best;
    for (const auto &entry : std::filesystem::directory_iterator(root)) {
        const auto name = entry.path().filename().string();
        if (entry.is_directory() && name.rfind("iter_", 0) == 0 && (best.empty() || name > best.filename().string())) {
            best = entry.path();
        }
    }
    return best;
}

// ---------------------------------------------------------------- evaluation

EvalReport
evaluate(const Scene &scene, const std::vector<EvalView> &views, const CameraIntrinsics &K, const RenderOptions &opts) {
    EvalReport r;
    for (const auto &v : views) {
        const auto img = render(scene, v.pose, K, opts);
        r.psnr.push_back(psnr(img, v.image));
        r.ssim.push_back(ssim(img, v.image));
    }
    if (!views.empty()) {
        r.mean_psnr = std::accumulate(r.psnr.begin(), r.psnr.end(), 0.0) / static_cast<double>(views.size());
        r.mean_ssim = std::accumulate(r.ssim.begin(), r.ssim.end(), 0.0) / static_cast<double>(views.size());
    }
    return r;
}

PoseError
pose_error(const ExposureTrajectory &est, const ExposureTrajectory &gt) {
    constexpr double kDeg = 180.0 / 3.14159265358979323846;
    PoseError        e;
    e.rotation_deg  = 0.5 * kDeg *
                     (rotation_angle_between(est.pose_start, gt.pose_start) +
                      rotation_angle_between(est.pose_end, gt.pose_end));
    e.translation_m = 0.5 * ((est.pose_start.center() - gt.pose_start.center()).norm() +
                             (est.pose_end.center() - gt.pose_end.center()).norm());
    return e;
}

} // namespace evsplat
