#pragma once

#include <string>
#include <vector>

namespace deconvo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNotConverged = 3;

/// Entry point for the `deconvo` tool. args[0] is the program name.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace deconvo::cli
