// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "emogen_cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return emogen::cli::run(args, std::cout, std::cerr);
}
