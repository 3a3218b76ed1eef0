#pragma once

#include <ostream>

namespace kafnet::cli {

// Runs one subcommand. Exit codes: 0 success, 2 usage or invalid input,
// 3 numeric failure (divergence, failed gradient check).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kafnet::cli
