#pragma once

#include <stdexcept>
#include <string>

namespace pforest {

/// Bad input or configuration the caller can fix. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Transport or store failure while talking to a completion backend. CLI exit code 2.
class BackendError : public std::runtime_error {
 public:
  explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pforest
