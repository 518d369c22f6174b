// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "json.hpp"

namespace renuance {

// POSTs a JSON body to an http:// URL and parses the JSON reply.
// Throws std::runtime_error on transport failure or a non-2xx status.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds = 30);

}  // namespace renuance
