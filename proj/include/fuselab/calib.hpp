#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fuselab/pointcloud.hpp"

namespace fuselab::calib {

/// 3x4 projective camera matrix (pixels). The left 3x3 block holds
/// fx, fy on the diagonal and cx, cy in the last column; the bottom row
/// must be (0, 0, 1, 0) so the third homogeneous coordinate is the
/// camera-frame depth.
struct CameraIntrinsics {
  Eigen::Matrix<double, 3, 4> m = Eigen::Matrix<double, 3, 4>::Zero();

  static CameraIntrinsics from_pinhole(double fx, double fy, double cx,
                                       double cy);
  double fx() const { return m(0, 0); }
  double fy() const { return m(1, 1); }
  void validate() const;
};

/// Rigid LiDAR-to-camera transform stored as a 4x4 homogeneous matrix
/// with orthonormal rotation block and bottom row (0, 0, 0, 1).
struct Extrinsics {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();

  static Extrinsics identity() { return {}; }
  static Extrinsics from_rt(const Eigen::Matrix3d& rotation,
                            const Eigen::Vector3d& translation);
  Eigen::Matrix3d rotation() const { return m.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return m.topRightCorner<3, 1>(); }
  void validate() const;
};

struct CameraConfig {
  CameraIntrinsics intrinsics;
  Extrinsics extrinsics;
  int width = 0;   // pixels
  int height = 0;  // pixels
};

/// Ordered list of M cameras with their calibration and image sizes.
struct CalibrationRig {
  std::vector<CameraConfig> cameras;

  std::size_t camera_count() const { return cameras.size(); }
  void validate() const;
};

/// Rotation-only calibration disturbance, degrees about the X, Y, Z axes.
/// Offsets are never perturbed.
struct DisturbanceSpec {
  double rx_deg = 0.0;
  double ry_deg = 0.0;
  double rz_deg = 0.0;

  void validate() const;  // finite, |angle| <= 45 degrees
};

/// Four-level angle-noise table: level k draws each axis angle uniformly
/// from [-range, +range] with ranges 0, 1, 2, 4 degrees.
struct PerturbationLevel {
  int level = 0;

  static PerturbationLevel from_int(int level);
  double range_deg() const;
};

struct PixelProjection {
  double u = 0.0;      // pixels
  double v = 0.0;      // pixels
  double depth = 0.0;  // meters, camera-frame Z
  bool valid = false;
};

/// Minimum camera-frame depth for a projection to count as in front of
/// the camera.
inline constexpr double kMinProjectionDepth = 1e-6;

/// E = E^x * E^y * E^z, right-handed rotations by the given angles with
/// zero translation.
Eigen::Matrix4d compose_disturbance(const DisturbanceSpec& spec);

/// T' = T * E (right multiplication; the translation column is
/// unchanged because E carries no translation).
Extrinsics perturb_extrinsics(const Extrinsics& t, const DisturbanceSpec& spec);

/// Draws (rx, ry, rz) independently and uniformly from the level's range.
/// Pure function of (level, seed, frame_id, camera_id); level 0 always
/// returns exact zeros.
DisturbanceSpec sample_disturbance(PerturbationLevel level, std::uint64_t seed,
                                   std::int64_t frame_id, int camera_id);

/// Projects every point through intr * extr (homogeneous divide by the
/// third coordinate). Points behind the camera or outside
/// [0,width) x [0,height) are flagged invalid, never dropped, so the
/// result aligns index-for-index with the input cloud.
std::vector<PixelProjection> project_points(const pointcloud::PointCloud& points,
                                            const CameraIntrinsics& intr,
                                            const Extrinsics& extr, int width,
                                            int height);

/// Rig config file: JSON tree with a "cameras" array of per-camera blocks
/// {"intrinsics": [12 row-major], "extrinsics": [16 row-major],
///  "width": px, "height": px}. Numbers round-trip exactly.
CalibrationRig load_rig(const std::filesystem::path& path);
void save_rig(const CalibrationRig& rig, const std::filesystem::path& path);

}  // namespace fuselab::calib
