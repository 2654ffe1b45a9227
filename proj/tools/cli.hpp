#pragma once

#include <iostream>

namespace protofg3d::cli {

/// Parses `argv` and runs one command. Returns 0 on success, 1 on usage
/// errors, 2 on data or format errors and 3 on numerical failures.
int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

/// Worker count for parallel sweeps: `requested` (0: all cores) capped by the
/// PROTO_FG3D_THREADS environment variable (0 or unset: no cap).
int resolve_threads(int requested);

}  // namespace protofg3d::cli
