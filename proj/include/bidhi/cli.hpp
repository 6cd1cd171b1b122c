#pragma once

#include <ostream>

namespace bidhi {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNoRecords = 3;
inline constexpr int kExitInfra = 4;
inline constexpr int kExitInterrupted = 130;

/// Entry point of the `bidhi` executable, callable in-process.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace bidhi
