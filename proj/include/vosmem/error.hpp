#pragma once

#include <stdexcept>
#include <string>

namespace vosmem {

/// Invalid configuration: bad hyper-parameters, mismatched shapes between a
/// config and its inputs, missing checkpoint files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent data: shape mismatches between masks,
/// out-of-range class indices, unreadable images.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vosmem
