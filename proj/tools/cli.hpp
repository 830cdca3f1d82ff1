#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ciplan::cli {

enum Exit : int { ok = 0, verification_failed = 1, input_error = 2, budget_exhausted = 3 };

/// Parses args (without the program name), runs one subcommand and writes its
/// reports to --out. Human output goes to out, diagnostics to err.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ciplan::cli
