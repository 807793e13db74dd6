// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "plksr/cli.hpp"

int main(int argc, char** argv) {
  return plksr::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
