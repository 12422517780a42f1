#pragma once

#include <ostream>

namespace socdbg {

/// The `socdbg` command line. Returns 0 on success, 1 when a command fails on
/// its data or provider, 2 on usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace socdbg
