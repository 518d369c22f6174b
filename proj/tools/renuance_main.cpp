// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/cli.h"

int main(int argc, char** argv) { return renuance::cli_dispatch(argc, argv); }
