// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synth, edi, train, render, eval, inspect.
// Exit codes: 0 success, 1 pipeline error, 2 usage error.

#pragma once

#include <ostream>

namespace evsplat {

inline constexpr int kExitOk    = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace evsplat
