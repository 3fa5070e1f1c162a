// Copyright 2026 The mpsts Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "mpsts/cli.hpp"

int main(int argc, char** argv)
{
    return mpsts::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
