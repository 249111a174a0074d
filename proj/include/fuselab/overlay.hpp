#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fuselab/calib.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/pointcloud.hpp"

namespace fuselab::overlay {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major

  std::array<std::uint8_t, 3> pixel(int x, int y) const {
    const std::size_t o = 3 * (static_cast<std::size_t>(y) * width + x);
    return {rgb[o], rgb[o + 1], rgb[o + 2]};
  }
};

/// Fixed 8-entry class palette; class c uses palette[c % 8].
std::array<std::uint8_t, 3> class_color(int cls);

/// Renders the cloud's valid projections for one camera as class-colored
/// dots over either the feature map's first channel (upscaled by its
/// stride) or a checkerboard. level > 0 perturbs that camera's extrinsics
/// via sample_disturbance(level, seed, frame_id, camera).
Image render_overlay(const pointcloud::PointCloud& cloud,
                     const std::optional<pointcloud::LabelArray>& labels,
                     const calib::CalibrationRig& rig, int camera, int level,
                     std::uint64_t seed, std::int64_t frame_id,
                     const fusion::FeatureMap* background);

/// Plain PPM (P3) image writer.
void write_ppm(const Image& image, const std::filesystem::path& path);

}  // namespace fuselab::overlay
