// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint directory layout:
//   scene.json         Gaussian parameters
//   trajectories.json  one trajectory per observation, dataset order
//   adam.bin           optimiser moments (little-endian, see below)
//   config.txt         flat key = value echo of the training config
//   state.json         iteration, epoch order/cursor, RNG state

#include "evsplat/json_io.hpp"
#include "evsplat/trainer.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace evsplat {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kAdamMagic[4] = {'A', 'D', 'M', '1'};

template <typename T>
void
put(std::ostream &out, const T &v) {
    out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T
get(std::istream &in, const std::filesystem::path &path) {
    T v{};
    in.read(reinterpret_cast<char *>(&v), sizeof(T));
    if (!in) {
        throw std::runtime_error(path.string() + ": truncated optimiser state");
    }
    return v;
}

void
write_adam(const std::filesystem::path &path, const AdamState &a) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out.write(kAdamMagic, 4);
    put<int64_t>(out, a.step);
    put<uint64_t>(out, a.m.size());
    out.write(reinterpret_cast<const char *>(a.m.data()), static_cast<std::streamsize>(a.m.size() * sizeof(double)));
    out.write(reinterpret_cast<const char *>(a.v.data()), static_cast<std::streamsize>(a.v.size() * sizeof(double)));
    put<uint64_t>(out, a.poses.size());
    for (const auto &p : a.poses) {
        put<int64_t>(out, p.step);
        for (double x : p.m) {
            put(out, x);
        }
        for (double x : p.v) {
            put(out, x);
        }
    }
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

AdamState
read_adam(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kAdamMagic, 4) != 0) {
        throw std::runtime_error(path.string() + ": not an optimiser state file");
    }
    AdamState a;
    a.step       = get<int64_t>(in, path);
    const auto n = get<uint64_t>(in, path);
    if (n > (uint64_t{1} << 32)) {
        throw std::runtime_error(path.string() + ": implausible parameter count");
    }
    a.m.resize(n);
    a.v.resize(n);
    in.read(reinterpret_cast<char *>(a.m.data()), static_cast<std::streamsize>(n * sizeof(double)));
    in.read(reinterpret_cast<char *>(a.v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) {
        throw std::runtime_error(path.string() + ": truncated optimiser state");
    }
    const auto np = get<uint64_t>(in, path);
    if (np > (uint64_t{1} << 24)) {
        throw std::runtime_error(path.string() + ": implausible observation count");
    }
    a.poses.resize(np);
    for (auto &p : a.poses) {
        p.step = get<int64_t>(in, path);
        for (double &x : p.m) {
            x = get<double>(in, path);
        }
        for (double &x : p.v) {
            x = get<double>(in, path);
        }
    }
    return a;
}

} // namespace

void
save_checkpoint(const std::filesystem::path &dir, const TrainState &state, const TrainConfig &cfg) {
    // write next to the target and rename, so a crash never leaves a half checkpoint
    auto tmp = dir;
    tmp += ".partial";
    std::filesystem::remove_all(tmp);
    std::filesystem::create_directories(tmp);

    write_json_file(tmp / "scene.json", scene_to_json(state.scene));
    Json trajs = Json::array();
    for (const auto &o : state.observations) {
        trajs.push_back(trajectory_to_json(o.trajectory));
    }
    write_json_file(tmp / "trajectories.json", trajs);
    write_adam(tmp / "adam.bin", state.adam);
    {
        std::ofstream out(tmp / "config.txt");
        out << config_to_text(cfg);
    }
    std::ostringstream rng;
    rng << state.rng;
    Json st;
    st["iteration"] = state.iteration;
    st["cursor"]    = state.cursor;
    st["order"]     = state.order;
    st["rng"]       = rng.str();
    write_json_file(tmp / "state.json", st);

    std::filesystem::remove_all(dir);
    std::filesystem::rename(tmp, dir);
}

void
load_checkpoint(const std::filesystem::path &dir, TrainState &state) {
    if (!std::filesystem::is_directory(dir)) {
        throw std::runtime_error("checkpoint " + dir.string() + " does not exist");
    }
    Scene      scene = scene_from_json(read_json_file(dir / "scene.json"));
    const Json trajs = read_json_file(dir / "trajectories.json");
    if (!trajs.is_array() || trajs.size() != state.observations.size()) {
        throw std::runtime_error((dir / "trajectories.json").string() + ": expected " +
                                 std::to_string(state.observations.size()) + " trajectories");
    }
    AdamState adam = read_adam(dir / "adam.bin");
    if (adam.m.size() != scene.size() * static_cast<size_t>(params_per_gaussian(scene.sh_degree)) ||
        adam.poses.size() != state.observations.size()) {
        throw std::runtime_error((dir / "adam.bin").string() + ": does not match the scene or dataset");
    }
    const Json st = read_json_file(dir / "state.json");

    std::istringstream rng_in(st.at("rng").get<std::string>());
    std::mt19937_64    rng;
    rng_in >> rng;
    if (!rng_in) {
        throw std::runtime_error((dir / "state.json").string() + ": bad RNG state");
    }
    for (size_t i = 0; i < trajs.size(); ++i) {
        state.observations[i].trajectory = trajectory_from_json(trajs[i]);
    }
    state.scene     = std::move(scene);
    state.adam      = std::move(adam);
    state.rng       = rng;
    state.iteration = st.at("iteration").get<int>();
    state.cursor    = st.at("cursor").get<size_t>();
    state.order     = st.at("order").get<std::vector<int>>();
}

} // namespace evsplat
