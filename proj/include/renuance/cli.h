// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace renuance {

// Runs one subcommand. Returns 0 on success, 1 on validation or runtime
// failure (one "error: ..." line on err) and 2 on usage errors.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, char** argv);

}  // namespace renuance
