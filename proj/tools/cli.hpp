#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stethofed::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Name of the environment variable that overrides the training output
// directory. An explicit --output flag still wins.
inline constexpr const char* kRunDirEnv = "STETHOFED_RUN_DIR";

// Runs one command line (args[0] is the program name) and returns the exit
// code. Normal output goes to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stethofed::cli
