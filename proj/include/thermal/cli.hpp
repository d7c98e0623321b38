#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace thermal::cli {

// start:stop:count[:geometric]; count = 1 yields {start}.
std::vector<double> parse_sweep(const std::string& text);

// Runs `thermal <command> [flags]`. `args` excludes the program name.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace thermal::cli
