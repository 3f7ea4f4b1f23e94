#pragma once

#include <stdexcept>
#include <string>

namespace covlab {

// Invalid inputs: malformed tables, out-of-range parameters, bad queries.
class ValidationError : public std::invalid_argument {
public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// An enumeration or search would exceed the configured state budget.
class GuardExceeded : public std::runtime_error {
public:
  explicit GuardExceeded(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace covlab
