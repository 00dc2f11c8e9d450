// Copyright 2026 The icpx Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "icpx/cli.hpp"

int main(int argc, char** argv) { return icpx::run_cli(argc, argv, std::cout, std::cerr); }
