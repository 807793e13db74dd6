// Copyright 2026 The PLKSR-CPU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>

namespace plksr {

/// Writes to a sibling temp file and renames it over `path`, so readers
/// never observe a partially written file. Throws plksr::Error on failure.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes);

}  // namespace plksr
