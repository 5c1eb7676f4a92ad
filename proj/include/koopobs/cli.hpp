#pragma once

#include <iosfwd>

namespace koopobs {

/// Entry point of the command-line tool. Exit codes: 0 Observable (or
/// success), 1 configuration error, 2 numerical precondition failure,
/// 3 Unobservable, 4 Inconclusive.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace koopobs
