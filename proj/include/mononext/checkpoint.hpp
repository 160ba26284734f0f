#pragma once

// Checkpoint archive, version 1. All integers little-endian.
//
//   char[8]  magic "MNXCKPT\0"
//   u32      version (1)
//   u64      config length, then that many bytes of config echo text
//   u32      parameter count
//   per parameter:
//     u32 name length, name bytes
//     u32 rank, i32[rank] shape
//     u64 element count, f32[count] values

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mononext/tensor.hpp"

namespace mononext {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const std::string& config_echo,
                     const std::vector<Parameter*>& params);

/// The config echo stored in a checkpoint.
std::string read_checkpoint_config(const std::filesystem::path& path);

/// Loads parameters by name. Throws ConfigError naming both digests when the
/// stored config differs from `expected_config`, and when names or shapes
/// do not line up.
void load_checkpoint(const std::filesystem::path& path, const std::string& expected_config,
                     const std::vector<Parameter*>& params);

}  // namespace mononext
