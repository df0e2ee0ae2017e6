// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// nlohmann::json conversions for the on-disk formats.
//   Pose:        {"q": [w,x,y,z], "t": [x,y,z]}
//   Trajectory:  {"start": Pose, "end": Pose, "t_start": s, "t_end": s}
//   Intrinsics:  {"fx", "fy", "cx", "cy", "width", "height"}
//   Scene:       {"sh_degree", "background", "gaussians": [{"pos", "log_scale",
//                 "q", "opacity_logit", "sh": [[R coeffs], [G coeffs], [B coeffs]]}]}

#pragma once

#include "evsplat/geometry.hpp"
#include "evsplat/scene.hpp"

#include <json.hpp>

#include <filesystem>

namespace evsplat {

using Json = nlohmann::json;

Json               pose_to_json(const Pose &p);
Pose               pose_from_json(const Json &j);
Json               trajectory_to_json(const ExposureTrajectory &t);
ExposureTrajectory trajectory_from_json(const Json &j);
Json               intrinsics_to_json(const CameraIntrinsics &k);
CameraIntrinsics   intrinsics_from_json(const Json &j);
Json               scene_to_json(const Scene &s);
Scene              scene_from_json(const Json &j);

Json read_json_file(const std::filesystem::path &path);
void write_json_file(const std::filesystem::path &path, const Json &j);

} // namespace evsplat
