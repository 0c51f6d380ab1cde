#pragma once

// Command-line front end. Subcommands stationary, evolve, turnpike, check and
// variational each read a JSON config and write their results plus a
// manifest.json into the output directory.
//
// Exit codes: 0 success, 1 usage or config error, 2 solver non-convergence,
// 3 internal error. Files of a failed run keep a ".partial" suffix.

#include <iosfwd>
#include <string>
#include <vector>

namespace dmfg {

/// args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dmfg
