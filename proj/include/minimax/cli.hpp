#pragma once

#include <iosfwd>

namespace minimax {

/// Entry point of the minimax_rates tool. Exit codes: 0 success, 1 invalid
/// input (usage, schema, parameters), 2 runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace minimax
