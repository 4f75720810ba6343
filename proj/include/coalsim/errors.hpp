#pragma once

#include <stdexcept>
#include <string>

namespace coalsim {

// A closed-form expression was evaluated outside the regime where it is
// valid (for example, second moments need n > 2r).
class UnsupportedRegimeError : public std::runtime_error {
 public:
  explicit UnsupportedRegimeError(const std::string& what)
      : std::runtime_error(what) {}
};

// An exact computation would exceed a hard size budget (state space or
// enumeration count).
class ResourceLimitError : public std::runtime_error {
 public:
  explicit ResourceLimitError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace coalsim
