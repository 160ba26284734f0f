#pragma once

// Procedural KITTI-layout scenes: flat-shaded cuboid cars on a road plane,
// seen through a KITTI-like P2. Used for tests and desk-scale training runs.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mononext/kitti_io.hpp"

namespace mononext {

struct SyntheticOptions {
  int width = 1242;
  int height = 375;
  int min_objects = 1;
  int max_objects = 4;
  double x_half_width = 12.0;  // lateral extent of the placement area
  double z_min = 6.0;
  double z_max = 40.0;
  double camera_height = 1.65;  // y of the ground plane
  double cell_x = 110.0 / 15.0;  // objects keep to distinct cells of this size
  double cell_z = 85.0 / 15.0;
  double x_origin = -55.0;
};

/// KITTI's typical left color camera matrix.
CalibBundle kitti_reference_calib();

Frame make_synthetic_frame(const std::string& frame_id, std::mt19937_64& rng,
                           const SyntheticOptions& opts = {});

/// Writes `count` frames named 000000, 000001, ... under root/{image_2,label_2,calib}.
std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root, int count,
                                                 std::uint64_t seed, const SyntheticOptions& opts = {});

}  // namespace mononext
