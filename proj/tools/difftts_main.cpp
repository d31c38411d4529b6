// Copyright (C) 2026 the difftts authors
// SPDX-License-Identifier: Apache-2.0
#include "difftts/cli.hpp"

int main(int argc, char** argv) { return difftts::cli::run_main(argc, argv); }
