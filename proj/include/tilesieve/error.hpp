#pragma once

#include <stdexcept>
#include <string>

namespace tilesieve {

// Bad input data: unreadable files, malformed manifests, images too small to
// tile, corrupt model files. The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters supplied by the caller (exit code 1 in the CLI).
class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace tilesieve
