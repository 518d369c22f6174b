// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container: one JSON header line followed by the little-endian
// double payload of every named section, in header order. The header carries
// the payload's SHA-256, so any byte flip is detected on load.

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "json.hpp"
#include "renuance/autodiff.h"

namespace renuance {

struct CheckpointData {
  nlohmann::json header;
  std::map<std::string, Matrix> sections;
};

// `header` is copied; "sections" and "sha256" are filled in.
void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      std::span<const ad::Parameter* const> params);
CheckpointData read_checkpoint(const std::filesystem::path& path);

// Copies matching sections into params; every param must be present with the
// same shape.
void assign_sections(const CheckpointData& data, std::span<ad::Parameter* const> params);

}  // namespace renuance
