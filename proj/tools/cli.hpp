#pragma once

#include <atomic>
#include <ostream>
#include <string>
#include <vector>

namespace iqp::cli {

// Runs one subcommand. args excludes the program name, e.g.
// {"lyapunov", "--p", "0,1"}. Returns 0 on success, 2 on usage errors and
// 1 on runtime errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Set from a signal handler to stop a running sweep after its current row.
std::atomic<bool>& interrupt_flag();

}  // namespace iqp::cli
