#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace modsensor::cli {

// Parses arguments (program name excluded), runs the subcommand and writes outputs.
// Exit codes: 0 success, 1 bad input or configuration, 2 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace modsensor::cli
