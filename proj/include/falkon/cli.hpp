#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace falkon {

/// Runs the command line `args` (without the program name). Reports go to
/// `out`, diagnostics to `err`. Returns 0 on success, 2 on usage errors and
/// 1 on runtime errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace falkon
