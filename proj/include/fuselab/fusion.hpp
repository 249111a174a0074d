#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <vector>

#include "fuselab/calib.hpp"
#include "fuselab/types.hpp"

namespace fuselab::fusion {

/// Dense per-camera feature tensor, channel-major: data[c*H*W + y*W + x].
/// stride is the integer scale of one map cell in source-image pixels.
struct FeatureMap {
  int camera_id = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  int stride = 1;
  std::vector<float> data;

  float at(int c, int y, int x) const {
    return data[static_cast<std::size_t>(c) * height * width +
                static_cast<std::size_t>(y) * width + x];
  }
  float& at(int c, int y, int x) {
    return data[static_cast<std::size_t>(c) * height * width +
                static_cast<std::size_t>(y) * width + x];
  }
  void validate() const;
};

/// Per-point concatenation of LiDAR features with the sampled camera
/// features: row i = [point features | camera 0 block | ... | camera M-1].
struct FusedPointFeatures {
  Eigen::Index n = 0;
  Eigen::Index point_dims = 0;   // C1
  Eigen::Index camera_dims = 0;  // M * C2
  MatrixXfR data;                // n x (C1 + M*C2)

  Eigen::Index dims() const { return point_dims + camera_dims; }
};

/// Bilinear interpolation at map coordinates (u, v); the caller divides
/// pixel coordinates by the map stride. The four neighbors are
/// (floor(u)+p, floor(v)+q) with weights
/// (1-|u-(floor(u)+p)|)*(1-|v-(floor(v)+q)|); neighbors outside the map
/// contribute zero.
Eigen::VectorXd bilinear_sample(const FeatureMap& map, double u, double v);

/// Samples every camera at its projected point locations and concatenates
/// the per-camera blocks in camera order. Invalid projections produce
/// exactly-zero blocks. projections[j] must have one entry per point.
MatrixXfR sample_all_cameras(
    const std::vector<FeatureMap>& maps,
    const std::vector<std::vector<calib::PixelProjection>>& projections);

/// Row-wise concatenation, point features first.
FusedPointFeatures fuse(const MatrixXfR& point_features,
                        const MatrixXfR& camera_features);

/// FLFM binary feature-map file.
/// Layout: magic "FLFM", version u16 (=1), camera_id u16, channels u16,
/// height u32, width u32, stride u16, then little-endian f32 data in
/// C order (channel-major). Unknown versions are rejected.
FeatureMap load_feature_map(const std::filesystem::path& path);
void save_feature_map(const FeatureMap& map, const std::filesystem::path& path);

}  // namespace fuselab::fusion
