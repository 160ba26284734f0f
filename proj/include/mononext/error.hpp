#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mononext {

/// Malformed input text (label, calibration, config, checkpoint files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a precondition: bad shape, bad range, bad enum value.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Missing or inconsistent configuration (split files, dataset layout, config digests).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training hit a non-finite loss. The message carries the diagnostic snapshot.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FNV-1a, used for config digests. Stable across platforms.
std::uint64_t fnv1a64(const std::string& text);
std::string hex_digest(std::uint64_t value);

}  // namespace mononext
