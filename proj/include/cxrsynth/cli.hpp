#pragma once

#include <ostream>

namespace cxrsynth {

// Entry point of the cxrsynth tool: subcommands audit, generate, stats,
// export and capacity. Returns the process exit status (0 ok, 2 config,
// 3 capacity, 4 provider, 5 retries exhausted, 6 storage, 1 other).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace cxrsynth
