#pragma once

#include <stdexcept>
#include <string>

namespace stylo {

// Bad user input: missing paths, malformed corpus files, invalid config.
// The CLI maps this to exit code 2; anything else thrown while a stage is
// running maps to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stylo
