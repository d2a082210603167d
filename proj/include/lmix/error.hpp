#pragma once

#include <stdexcept>
#include <string>

namespace lmix {

/// Malformed inputs and contract violations. CLI maps these to exit code 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem and codec failures. CLI maps these to exit code 2.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lmix
