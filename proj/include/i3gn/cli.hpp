#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace i3gn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

/// Environment variable naming the default corpus directory.
inline constexpr const char* kDataDirEnv = "I3GN_DATA_DIR";

/// Runs one command line (args[0] is the program name). Reports go to `out`
/// as JSON, diagnostics and usage text to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace i3gn::cli
