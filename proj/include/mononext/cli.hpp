#pragma once

#include <iosfwd>

namespace mononext {

/// Subcommands: split, train, predict, eval, visualize, synth.
/// Returns 0 on success, 1 on a runtime failure, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mononext
