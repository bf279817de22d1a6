#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oca {

inline constexpr const char* kToolVersion = "1.0.0";

/// Entry point behind the `oca` binary. args excludes the program name.
/// Returns 0 on success, 2 on usage/config errors, 3 on data errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oca
