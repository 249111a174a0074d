#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace fuselab::pointcloud {

/// N points with xyz coordinates (meters, LiDAR frame) and reflection
/// intensity in [0, 1]. has_intensity records whether the source carried
/// an intensity channel so file round-trips are byte-exact.
struct PointCloud {
  Eigen::Matrix3Xf xyz;       // column i = point i
  Eigen::VectorXf intensity;  // size n (zeros when has_intensity is false)
  bool has_intensity = true;

  Eigen::Index n() const { return xyz.cols(); }
  void validate() const;
};

/// Per-point class labels, one per point of the paired cloud.
struct LabelArray {
  std::vector<int> labels;
  int n_cls = 0;

  std::size_t size() const { return labels.size(); }
  void validate() const;
};

/// Training-time geometric augmentations: independent XY flips, global
/// scale, Z rotation, then per-coordinate Gaussian jitter.
struct AugmentationConfig {
  bool flip_x = true;
  bool flip_y = true;
  double scale_lo = 0.95;
  double scale_hi = 1.05;
  bool rotate_z = true;
  double jitter_sigma = 0.02;  // meters

  void validate() const;
};

struct AugmentResult {
  PointCloud cloud;
  /// Composite affine transform of the non-noise portion
  /// (rotate * scale * flip), applied left to points as column vectors.
  Eigen::Matrix4d transform;
};

/// Applies flips, scale, Z-rotation and Gaussian jitter in that order.
/// Deterministic given the seed; labels are untouched by construction
/// (the caller keeps its LabelArray alongside).
///
/// Draw order from Rng(seed): flip_x sign, flip_y sign, scale, angle
/// (each only when enabled), then per-point noise in x,y,z order for
/// ascending point index (only when jitter_sigma > 0).
AugmentResult augment(const PointCloud& cloud, const AugmentationConfig& cfg,
                      std::uint64_t seed);

struct LoadedCloud {
  PointCloud cloud;
  std::optional<LabelArray> labels;
};

/// FLPC binary point file.
/// Layout: magic "FLPC", version u16 (=1), point count u64, flags u16
/// (bit0: labels present, bit1: intensity present), little-endian f32
/// records x,y,z[,intensity] per point, then u16 labels per point if
/// present. Unknown versions are rejected.
LoadedCloud load_cloud(const std::filesystem::path& path);
void save_cloud(const PointCloud& cloud, const std::optional<LabelArray>& labels,
                const std::filesystem::path& path);

}  // namespace fuselab::pointcloud
