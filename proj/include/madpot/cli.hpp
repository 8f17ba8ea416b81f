#pragma once

#include <string>
#include <vector>

namespace madpot {

// Exit codes: 0 success, 2 usage, 3 I/O or parse failure, 4 numerical
// infeasibility.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // argv[0] implied

}  // namespace madpot
