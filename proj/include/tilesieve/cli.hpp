#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tilesieve::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

// Runs one invocation. `args` excludes the program name.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);
int run(int argc, char **argv);

} // namespace tilesieve::cli
