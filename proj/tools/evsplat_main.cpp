// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "evsplat/cli.hpp"

#include <iostream>

int
main(int argc, char **argv) {
    return evsplat::run_cli(argc, argv, std::cout, std::cerr);
}
