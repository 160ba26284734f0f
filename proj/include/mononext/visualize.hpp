#pragma once

// Camera-view wireframes and a bird's-eye-view plot for one frame.
// Ground truth is drawn green, predictions blue, the ego camera black.

#include <filesystem>
#include <vector>

#include "mononext/grid_codec.hpp"
#include "mononext/kitti_io.hpp"

namespace mononext {

struct VisualizeResult {
  std::filesystem::path camera_path;
  std::filesystem::path bev_path;
  int camera_gt = 0;  // boxes drawn in the camera view
  int camera_pred = 0;
  int bev_gt = 0;
  int bev_pred = 0;
};

/// Writes <frame_id>_camera.png and <frame_id>_bev.png. Boxes with any
/// corner at z <= 0 are left out of the camera view but still plotted in BEV.
/// The BEV canvas covers the grid's x/z extent plus a margin behind the camera.
VisualizeResult visualize(const Frame& frame, const std::vector<BoxSpec>& dets, const std::vector<BoxSpec>& gts,
                          const std::filesystem::path& out_dir, const GridSpec& grid = {});

}  // namespace mononext
