#pragma once

#include <iosfwd>

namespace uinvase::cli {

// Exit codes: 0 success, 2 configuration error, 3 training divergence,
// 4 missing artifact, 1 anything else.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitMissing = 4;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace uinvase::cli
