#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace segcal {

/// Runs one segcal subcommand. `args` excludes the program name
/// (e.g. {"eval", "--manifest", "m.json"}). Every successful run emits
/// exactly one JSON run report, to `out` or to the --report path.
///
/// Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace segcal
