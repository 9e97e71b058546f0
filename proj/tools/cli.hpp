#pragma once

#include <ostream>

namespace iact::cli {

/// Parses and runs one `iact` invocation. Returns 0 on success, 2 for usage
/// errors (unknown subcommand/flag, invalid values) and 1 for runtime failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace iact::cli
