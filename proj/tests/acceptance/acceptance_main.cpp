// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
//
//   acceptance [--only 1,2,...] [--iters N] [--threads N] [--keep]

#include "evsplat/dataset.hpp"
#include "evsplat/edi.hpp"
#include "evsplat/events.hpp"
#include "evsplat/image_io.hpp"
#include "evsplat/losses.hpp"
#include "evsplat/renderer.hpp"
#include "evsplat/trainer.hpp"

#include "support/fd.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace evsplat;
namespace fs = std::filesystem;
using evsplat::testing::random_scene;
using evsplat::testing::random_small_pose;
using evsplat::testing::small_camera;

namespace {

struct Verdict {
    bool        pass = false;
    std::string detail;
};

std::string
fmt(const char *f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string
read_bytes(const fs::path &p) {
    std::ifstream      in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double
max_abs_diff(const RadianceImage &a, const RadianceImage &b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    }
    return worst;
}

// ---------------------------------------------------------------- 1

Verdict
gradient_check() {
    const CameraIntrinsics K = small_camera(16, 20.0);
    RenderOptions          opts;
    opts.alpha_min = 0.0; // no skip discontinuity inside the FD stencil
    const int n    = 5;

    std::mt19937_64 rng(20240601);
    int             checked = 0, failed = 0;
    double          worst = 0.0;
    std::string     worst_where;

    for (int trial = 0; trial < 5; ++trial) {
        const Scene s      = random_scene(rng, 3, 1, 2.5, 3.5, 0.2, -0.3, 0.2, -0.5, 1.5);
        const Scene target = random_scene(rng, 3, 1, 2.5, 3.5, 0.2, -0.3, 0.2, -0.5, 1.5);
        const ExposureTrajectory traj(random_small_pose(rng, 0.03, 0.05), random_small_pose(rng, 0.03, 0.05), 0.0,
                                      1.0);
        const ExposureTrajectory true_traj(random_small_pose(rng, 0.03, 0.05), random_small_pose(rng, 0.03, 0.05),
                                           0.0, 1.0);

        // observation made from a different scene and trajectory
        EventConfig ecfg;
        const auto  observed = render_blurred(target, true_traj, n, K, opts).blurred;
        std::vector<TimedFrame> frames;
        for (double t : latent_timestamps(true_traj, 41)) {
            frames.push_back({t, log_luminance(render(target, interpolate_pose(true_traj, t), K, opts), ecfg)});
        }
        const EventStream   events = simulate_events(frames, ecfg);
        const RadianceImage edi    = edi_mid_exposure(observed, events, true_traj, ecfg);

        RadianceImage                          adj(K.width, K.height, 3);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (double &v : adj.data()) {
            v = u(rng);
        }

        struct Term {
            const char *name;
            LossWeights w;
        };
        std::vector<Term> terms;
        LossWeights       only_blur, only_ev, only_edi, all;
        only_blur.lambda_ev = only_blur.lambda_edi = 0.0;
        only_ev.lambda_blur = only_ev.lambda_edi = 0.0;
        only_ev.lambda_ev                        = 1.0;
        only_edi.lambda_blur = only_edi.lambda_ev = 0.0;
        terms = {{"blur", only_blur}, {"event", only_ev}, {"edi", only_edi}, {"total", all}};

        auto record = [&](const testing::FdReport &r, const std::string &what) {
            checked += r.checked;
            failed += r.failed;
            if (r.worst_rel > worst) {
                worst       = r.worst_rel;
                worst_where = "scene " + std::to_string(trial) + " " + what + " " + r.worst_name;
            }
        };

        // raw blurred render against a random adjoint
        {
            const auto obj = [&](const Scene &sc, const ExposureTrajectory &t) {
                const auto img = render_blurred(sc, t, n, K, opts).blurred;
                double     acc = 0.0;
                for (size_t i = 0; i < img.size(); ++i) {
                    acc += img.data()[i] * adj.data()[i];
                }
                return acc;
            };
            record(testing::check_gradients(s, traj, obj, render_with_grad(s, traj, K, n, adj, opts), 1e-3, 1e-8),
                   "render");
        }
        for (const auto &term : terms) {
            const uint64_t window_seed = 99 + trial;
            const auto     obj         = [&](const Scene &sc, const ExposureTrajectory &t) {
                std::mt19937_64 wr(window_seed);
                return observation_loss(render_blurred(sc, t, n, K, opts), observed, events, edi, term.w, wr).total;
            };
            std::mt19937_64 wr(window_seed);
            const auto      br  = render_blurred(s, traj, n, K, opts);
            const auto      rep = observation_loss(br, observed, events, edi, term.w, wr);
            const auto      g   = backward_latents(s, traj, K, br.times, rep.latent_adjoints, opts);
            // L1 kinks sit closer than 1e-4 to some stencils; a tenth of the step clears them
            record(testing::check_gradients(s, traj, obj, g, 1e-3, 1e-8, 1e-5, 1e-6), term.name);
        }
    }
    Verdict v;
    v.pass   = failed == 0;
    v.detail = std::to_string(checked) + " partials, " + std::to_string(failed) + " above 1e-3, worst rel " +
               fmt("%.2e", worst) + " (" + worst_where + ")";
    return v;
}

// ---------------------------------------------------------------- 2

Verdict
compositing_oracle() {
    std::mt19937_64 rng(424242);
    double          worst_img = 0.0, worst_T = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const CameraIntrinsics K = small_camera(24 + trial % 3 * 4, 26.0);
        Scene                  s = random_scene(rng, 4 + trial % 5, trial % 2);
        const Pose             P = random_small_pose(rng, 0.05, 0.1);
        worst_img = std::max(worst_img, max_abs_diff(render(s, P, K), testing::naive_render(s, P, K)));

        // white splats on a black background render exactly 1 - T_final
        for (auto &g : s.gaussians) {
            for (auto &c : g.sh) {
                c.setZero();
            }
            g.sh[0] = Eigen::Vector3d::Constant(0.5 / 0.28209479177387814);
        }
        s.background.setZero();
        const auto full = render_full(s, P, K);
        for (int p = 0; p < K.width * K.height; ++p) {
            for (int c = 0; c < 3; ++c) {
                worst_T = std::max(worst_T,
                                   std::abs(full.image.data()[static_cast<size_t>(p) * 3 + c] +
                                            full.final_transmittance[static_cast<size_t>(p)] - 1.0));
            }
        }
    }
    Verdict v;
    v.pass   = worst_img < 1e-6 && worst_T < 1e-6;
    v.detail = "20 scenes, max |render - naive| " + fmt("%.2e", worst_img) + ", max |sum w + T - 1| " +
               fmt("%.2e", worst_T);
    return v;
}

// ---------------------------------------------------------------- 3

std::vector<TimedFrame>
random_log_video(std::mt19937_64 &rng, int w, int h, int frames, double step_sigma) {
    std::normal_distribution<double>       n01(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<TimedFrame>                out;
    RadianceImage                          cur(w, h, 1);
    for (double &v : cur.data()) {
        v = std::log(0.05 + u(rng));
    }
    double t = 0.0;
    for (int k = 0; k < frames; ++k) {
        if (k > 0) {
            t += 0.005 + 0.02 * u(rng);
            for (double &v : cur.data()) {
                v += step_sigma * n01(rng);
            }
        }
        out.push_back({t, cur});
    }
    return out;
}

Verdict
event_quantization() {
    std::mt19937_64 rng(31337);
    EventConfig     cfg;
    double          worst_first = 0.0, worst_pair = 0.0;
    size_t          total       = 0;
    for (int seq = 0; seq < 10; ++seq) {
        const int  w = 10 + seq, h = 8 + seq % 4;
        const auto frames = random_log_video(rng, w, h, 40, 0.15 + 0.05 * seq);
        const auto stream = simulate_events(frames, cfg);
        total += stream.size();
        for (size_t a = 0; a < frames.size(); ++a) {
            for (size_t b = a + 1; b < frames.size(); ++b) {
                const auto c = accumulate(stream, frames[a].t, frames[b].t);
                for (size_t i = 0; i < c.counts.size(); ++i) {
                    const double r = std::abs(
                        c.counts[i] - (frames[b].log_image.data()[i] - frames[a].log_image.data()[i]) / cfg.theta);
                    (a == 0 ? worst_first : worst_pair) = std::max(a == 0 ? worst_first : worst_pair, r);
                }
            }
        }
    }
    Verdict v;
    v.pass   = worst_first < 1.0;
    v.detail = "10 sequences, " + std::to_string(total) + " events, max |count - dL/theta| from first frame " +
               fmt("%.6f", worst_first) + " (arbitrary frame pairs " + fmt("%.6f", worst_pair) + ", bound 2)";
    return v;
}

// ---------------------------------------------------------------- 4

Verdict
edi_exactness() {
    const double    theta = 0.2;
    const int       m     = kDefaultEdiBins;
    std::mt19937_64 rng(777);
    double          worst_pc = 0.0, worst_ramp = 0.0, worst_empty = 0.0;

    for (int trial = 0; trial < 5; ++trial) {
        // piecewise constant: log luminance jumps by whole thresholds on bin boundaries
        const int                              w = 9, h = 7;
        const double                           dt = 1.0 / m;
        std::uniform_int_distribution<int>     jump(-2, 2);
        std::uniform_real_distribution<double> u(0.2, 1.0);
        const size_t                           P = static_cast<size_t>(w * h);
        std::vector<std::vector<int>>          level(P, std::vector<int>(m, 0));
        for (auto &lv : level) {
            for (int k = 1; k < m; ++k) {
                lv[k] = lv[k - 1] + (k == m / 2 ? 0 : jump(rng));
            }
        }
        std::vector<double>          base(P);
        std::vector<Eigen::Vector3d> chroma(P);
        for (size_t p = 0; p < P; ++p) {
            base[p]   = std::log(u(rng));
            chroma[p] = Eigen::Vector3d(u(rng), u(rng), u(rng));
        }
        std::vector<TimedFrame> frames;
        for (int k = 0; k < m; ++k) {
            for (double off : {0.1, 0.9}) {
                TimedFrame f{(k + off) * dt, RadianceImage(w, h, 1)};
                for (size_t p = 0; p < P; ++p) {
                    f.log_image.data()[p] = base[p] + theta * level[p][k];
                }
                frames.push_back(std::move(f));
            }
        }
        EventConfig ecfg;
        ecfg.theta = theta;
        EdiRequest req;
        req.events = simulate_events(frames, ecfg);
        req.theta  = theta;
        req.bins   = m;
        req.t_ref  = 0.5;
        RadianceImage B(w, h, 3), truth(w, h, 3);
        for (size_t p = 0; p < P; ++p) {
            double mean = 0.0;
            for (int k = 0; k < m; ++k) {
                mean += std::exp(base[p] + theta * level[p][k]) / m;
            }
            const double Y = std::exp(base[p] + theta * level[p][m / 2]);
            for (int c = 0; c < 3; ++c) {
                B.data()[p * 3 + c]     = chroma[p][c] * mean;
                truth.data()[p * 3 + c] = chroma[p][c] * Y;
            }
        }
        req.blurred  = B;
        const auto I = edi_deblur(req);
        for (size_t i = 0; i < I.size(); ++i) {
            worst_pc = std::max(worst_pc, std::abs(I.data()[i] - truth.data()[i]) / truth.data()[i]);
        }

        // smooth log-linear ramp, blurred radiance integrated exactly
        RadianceImage           Br(w, h, 1), mid(w, h, 1);
        std::vector<TimedFrame> ends{{0.0, RadianceImage(w, h, 1)}, {1.0, RadianceImage(w, h, 1)}};
        for (size_t p = 0; p < P; ++p) {
            const double a = std::log(0.1 + 0.8 * u(rng));
            const double b = 2.5 * (2 * u(rng) - 1);
            Br.data()[p]   = std::abs(b) < 1e-12 ? std::exp(a) : (std::exp(a + 0.5 * b) - std::exp(a - 0.5 * b)) / b;
            mid.data()[p]  = std::exp(a);
            ends[0].log_image.data()[p] = a - 0.5 * b;
            ends[1].log_image.data()[p] = a + 0.5 * b;
        }
        const auto Ir = edi_mid_exposure(Br, simulate_events(ends, ecfg), ExposureTrajectory(Pose{}, Pose{}, 0.0, 1.0),
                                         ecfg);
        for (size_t i = 0; i < Ir.size(); ++i) {
            worst_ramp = std::max(worst_ramp, std::abs(Ir.data()[i] - mid.data()[i]) / mid.data()[i]);
        }

        // no events: output is the blurred input, bit for bit
        EdiRequest empty;
        empty.blurred = B;
        empty.events  = EventStream(w, h);
        empty.theta   = theta;
        worst_empty   = std::max(worst_empty, max_abs_diff(edi_deblur(empty), B));
    }
    Verdict v;
    v.pass   = worst_pc < 1e-6 && worst_ramp < theta && worst_empty == 0.0;
    v.detail = "piecewise constant rel " + fmt("%.2e", worst_pc) + " (< 1e-6), ramp rel " + fmt("%.4f", worst_ramp) +
               " (< 0.2), empty stream max diff " + fmt("%.1e", worst_empty) + " (== 0)";
    return v;
}

// ---------------------------------------------------------------- 5

Verdict
blur_convergence(const Dataset &ds) {
    double worst = 0.0;
    size_t worst_view = 0;
    for (size_t i = 0; i < ds.gt_trajectories.size(); ++i) {
        const auto &t = ds.gt_trajectories[i];
        const auto  d = max_abs_diff(render_blurred(*ds.gt_scene, t, 5, ds.intrinsics).blurred,
                                     render_blurred(*ds.gt_scene, t, 101, ds.intrinsics).blurred);
        if (d > worst) {
            worst      = d;
            worst_view = i;
        }
    }
    const auto  &t0 = ds.gt_trajectories.front();
    const ExposureTrajectory still(t0.pose_start, t0.pose_start, t0.t_start, t0.t_end);
    const double static_diff = max_abs_diff(render_blurred(*ds.gt_scene, still, 5, ds.intrinsics).blurred,
                                            render_blurred(*ds.gt_scene, still, 101, ds.intrinsics).blurred);
    Verdict      v;
    v.pass   = worst < 0.02 && static_diff == 0.0;
    v.detail = "max ||n5 - n101||_inf " + fmt("%.4f", worst) + " (view " + std::to_string(worst_view) +
               ", < 0.02), static " + fmt("%.1e", static_diff) + " (== 0)";
    return v;
}

// ---------------------------------------------------------------- 6-8

struct RunResult {
    double      psnr     = 0.0;
    double      rotation = 0.0;
    std::string log;
    double      seconds = 0.0;
};

double
mean_rotation_error(const std::vector<Observation> &obs, const std::vector<ExposureTrajectory> &gt) {
    double acc = 0.0;
    for (size_t i = 0; i < obs.size(); ++i) {
        acc += pose_error(obs[i].trajectory, gt[i]).rotation_deg;
    }
    return acc / static_cast<double>(obs.size());
}

RunResult
train_run(const Dataset &ds, TrainConfig cfg, const fs::path &dir) {
    fs::remove_all(dir);
    cfg.checkpoint_every = cfg.iterations > 0 ? cfg.iterations : 1;
    TrainState      st(ds.init_scene, ds.observations, cfg.seed);
    TrainRunOptions ro;
    ro.output_dir  = dir;
    const auto t0  = std::chrono::steady_clock::now();
    train(st, cfg, ro);
    RunResult r;
    r.seconds  = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.psnr     = evaluate(st.scene, ds.eval_views, ds.intrinsics).mean_psnr;
    r.rotation = mean_rotation_error(st.observations, ds.gt_trajectories);
    r.log      = read_bytes(dir / "train_log.jsonl");
    return r;
}

// ---------------------------------------------------------------- 9

Verdict
format_round_trips(const fs::path &dir) {
    std::mt19937_64                         rng(9);
    const int                               w = 1280, h = 720;
    std::uniform_real_distribution<double>  ut(0.0, 10.0);
    std::uniform_int_distribution<int>      ux(0, w - 1), uy(0, h - 1), up(0, 1);
    std::vector<Event>                      ev(1000000);
    for (auto &e : ev) {
        e = {ut(rng), static_cast<uint16_t>(ux(rng)), static_cast<uint16_t>(uy(rng)),
             static_cast<int8_t>(up(rng) ? 1 : -1)};
    }
    const EventStream stream(w, h, std::move(ev));
    write_events_binary(dir / "round.evt", stream);
    const bool events_ok = read_events_binary(dir / "round.evt") == stream;

    // PFM stores float32, so draw float-representable values over a wide range
    std::uniform_real_distribution<float> mant(-1.0f, 1.0f);
    std::uniform_int_distribution<int>    ex(-20, 20);
    RadianceImage                         img(1000, 1000, 1);
    for (double &v : img.data()) {
        v = static_cast<double>(std::ldexp(mant(rng), ex(rng)));
    }
    write_pfm(dir / "round.pfm", img);
    const RadianceImage back   = read_pfm(dir / "round.pfm");
    const bool          pfm_ok = back.width() == img.width() && back.height() == img.height() &&
                        back.channels() == img.channels() && std::ranges::equal(back.data(), img.data());

    RadianceImage rgb(600, 560, 3); // 336000 pixels x 3 channels
    for (double &v : rgb.data()) {
        v = static_cast<double>(std::ldexp(mant(rng), ex(rng)));
    }
    write_pfm(dir / "round_rgb.pfm", rgb);
    const RadianceImage rgb_back = read_pfm(dir / "round_rgb.pfm");
    const bool          rgb_ok   = std::ranges::equal(rgb_back.data(), rgb.data());

    Verdict v;
    v.pass   = events_ok && pfm_ok && rgb_ok;
    v.detail = std::string("1e6 events ") + (events_ok ? "identical" : "DIFFER") + ", 1e6 grey PFM pixels " +
               (pfm_ok ? "identical" : "DIFFER") + ", RGB PFM " + (rgb_ok ? "identical" : "DIFFER");
    return v;
}

} // namespace

int
main(int argc, char **argv) {
    std::set<int> only;
    int           iters   = 5000;
    int           threads = 1;
    bool          keep    = false;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string tok; std::getline(ss, tok, ',');) {
                only.insert(std::stoi(tok));
            }
        } else if (a == "--iters" && i + 1 < argc) {
            iters = std::stoi(argv[++i]);
        } else if (a == "--threads" && i + 1 < argc) {
            threads = std::stoi(argv[++i]);
        } else if (a == "--keep") {
            keep = true;
        } else {
            std::cerr << "usage: acceptance [--only 1,2,...] [--iters N] [--threads N] [--keep]\n";
            return 2;
        }
    }
    const auto wanted = [&](int c) { return only.empty() || only.count(c) > 0; };

    const fs::path work = fs::temp_directory_path() / ("evsplat_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(work);

    int  failures = 0;
    auto report   = [&](int c, const std::string &name, const std::function<Verdict()> &fn) {
        if (!wanted(c)) {
            return;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Verdict    v;
        try {
            v = fn();
        } catch (const std::exception &e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += v.pass ? 0 : 1;
        std::printf("criterion %d %s: %s: %s [%.1f s]\n", c, v.pass ? "PASS" : "FAIL", name.c_str(),
                    v.detail.c_str(), s);
        std::fflush(stdout);
    };

    report(1, "gradient correctness", gradient_check);
    report(2, "compositing oracle", compositing_oracle);
    report(3, "event quantization", event_quantization);
    report(4, "EDI exactness", edi_exactness);
    report(9, "format round trips", [&] { return format_round_trips(work); });

    if (wanted(5) || wanted(6) || wanted(7) || wanted(8)) {
        std::optional<Dataset> ds;
        try {
            synth_dataset(SynthConfig{}, work / "fixture");
            ds = load_dataset(work / "fixture");
        } catch (const std::exception &e) {
            for (int c : {5, 6, 7, 8}) {
                if (wanted(c)) {
                    ++failures;
                    std::printf("criterion %d FAIL: default fixture could not be built: %s\n", c, e.what());
                }
            }
        }
        if (ds) {
            report(5, "blur-model convergence", [&] { return blur_convergence(*ds); });

            std::map<std::string, RunResult> first, second;
            if (wanted(6) || wanted(7) || wanted(8)) {
                TrainConfig base;
                base.iterations = iters;
                base.seed       = 1;
                base.threads    = threads;
                std::vector<std::pair<std::string, TrainConfig>> configs;
                configs.emplace_back("total", base);
                if (wanted(7) || wanted(8)) {
                    TrainConfig blur = base, blur_ev = base, blur_edi = base;
                    blur.weights.lambda_ev  = 0.0;
                    blur.weights.lambda_edi = 0.0;
                    blur_ev.weights.lambda_edi = 0.0;
                    blur_edi.weights.lambda_ev = 0.0;
                    configs.emplace_back("blur", blur);
                    configs.emplace_back("blur+ev", blur_ev);
                    configs.emplace_back("blur+edi", blur_edi);
                }
                for (const auto &[name, cfg] : configs) {
                    first[name] = train_run(*ds, cfg, work / ("run_" + name));
                    std::printf("  run %-9s eval PSNR %.3f dB, rotation error %.4f deg [%.1f s]\n", name.c_str(),
                                first[name].psnr, first[name].rotation, first[name].seconds);
                    std::fflush(stdout);
                    if (wanted(8)) {
                        second[name] = train_run(*ds, cfg, work / ("rerun_" + name));
                    }
                }
            }

            report(6, "end-to-end recovery", [&] {
                const double psnr0 = evaluate(ds->init_scene, ds->eval_views, ds->intrinsics).mean_psnr;
                const double rot0  = mean_rotation_error(ds->observations, ds->gt_trajectories);
                const auto  &r     = first.at("total");
                Verdict      v;
                v.pass   = r.psnr - psnr0 >= 5.0 && r.rotation <= 0.5 * rot0;
                v.detail = std::to_string(iters) + " iterations, eval PSNR " + fmt("%.2f", psnr0) + " -> " +
                           fmt("%.2f", r.psnr) + " dB (gain " + fmt("%.2f", r.psnr - psnr0) +
                           ", needs >= 5), rotation " + fmt("%.3f", rot0) + " -> " + fmt("%.3f", r.rotation) +
                           " deg (needs <= " + fmt("%.3f", 0.5 * rot0) + ")";
                return v;
            });

            report(7, "ablation ordering", [&] {
                const double blur = first.at("blur").psnr, ev = first.at("blur+ev").psnr,
                             edi = first.at("blur+edi").psnr, total = first.at("total").psnr;
                const double best = std::max({blur, ev, edi, total});
                Verdict      v;
                v.pass   = blur <= ev && blur <= total && total >= best - 0.3;
                v.detail = "PSNR blur " + fmt("%.2f", blur) + ", blur+ev " + fmt("%.2f", ev) + ", blur+edi " +
                           fmt("%.2f", edi) + ", total " + fmt("%.2f", total) +
                           " (needs blur <= blur+ev, blur <= total, total within 0.3 dB of the best)";
                return v;
            });

            report(8, "determinism", [&] {
                Verdict v;
                v.pass = !first.empty();
                for (const auto &[name, r] : first) {
                    const bool same = !r.log.empty() && r.log == second.at(name).log;
                    v.pass          = v.pass && same;
                    v.detail += name + (same ? " identical" : " DIFFERS") + "; ";
                }
                v.detail += "training logs over two runs with seed 1, " + std::to_string(threads) + " thread(s)";
                return v;
            });
        }
    }

    if (!keep) {
        fs::remove_all(work);
    } else {
        std::printf("work directory kept at %s\n", work.string().c_str());
    }
    std::printf("%s: %d criterion failure(s)\n", failures == 0 ? "ALL PASS" : "SOME FAIL", failures);
    return failures == 0 ? 0 : 1;
}
