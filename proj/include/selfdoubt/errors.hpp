#pragma once

#include <stdexcept>
#include <string>

namespace selfdoubt {

/// Bad user input: malformed files, contract violations, missing flags.
/// The CLI maps this to exit code 1.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Environment failures: write errors, network errors after retries.
/// The CLI maps this to exit code 2.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace selfdoubt
