#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>

namespace fashion {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// FASHION_SYNTH_HOME, or ./fashion_home when unset. Datasets default to
// <home>/data, checkpoints to <home>/checkpoints.
std::filesystem::path fashion_home();

// Arguments exclude the program name. Returns the process exit code.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace fashion
