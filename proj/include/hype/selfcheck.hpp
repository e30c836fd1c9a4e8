#pragma once

#include <cstdint>
#include <iosfwd>

namespace hype {

// Seeded geometry-oracle and gradient suites for the `selfcheck` CLI
// subcommand. Prints one line per suite plus a pass-count summary; returns
// false if anything failed.
bool run_selfcheck(std::ostream& out, std::uint64_t seed = 20240501);

}  // namespace hype
