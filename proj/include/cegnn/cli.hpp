#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cegnn::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNumeric = 2, kExitIo = 3 };

inline constexpr const char* kVersion = "0.1.0";

/// Runs one command. `args` excludes the program name, e.g.
/// {"train", "--data", "runs/data", "--out", "runs/train"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace cegnn::cli
