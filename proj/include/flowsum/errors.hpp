#pragma once

#include <stdexcept>
#include <string>

namespace flowsum {

// Invalid input: malformed files, schema violations, bad configuration.
// The CLI maps UserError to exit status 1; any other exception that
// escapes is an internal error and maps to exit status 2.
class UserError : public std::runtime_error {
 public:
  explicit UserError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace flowsum
