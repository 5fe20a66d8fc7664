#pragma once

#include <stdexcept>
#include <string>

namespace anclab {

// Base class for every error raised by the library. Messages are stable
// strings that callers (and the CLI) may match on.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed configuration or precondition violation in user-supplied input.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace anclab
