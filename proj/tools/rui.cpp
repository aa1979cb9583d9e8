// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rui/cli.hpp"

int main(int argc, char** argv) { return rui::cli::dispatch(argc, argv); }
