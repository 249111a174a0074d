#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fuselab/calib.hpp"
#include "fuselab/eval.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/losses.hpp"
#include "fuselab/pointcloud.hpp"
#include "fuselab/types.hpp"

namespace fuselab::toytrain {

/// Number of geometric feature channels produced per point.
inline constexpr int kGeomDims = 5;
/// Channels per synthetic camera feature map.
inline constexpr int kSceneChannels = 6;
/// Cameras in the synthetic rig.
inline constexpr int kSceneCameras = 2;
/// Classes in a synthetic scene.
inline constexpr int kSceneClasses = 4;

/// A synthetic desk-scale scene. Ground (class 0) and a wall (class 3)
/// are geometrically distinctive; classes 1 and 2 are paired poles with
/// identical geometry whose camera patterns are the only way to tell
/// them apart, so segmentation quality tracks sampling alignment.
struct SyntheticScene {
  pointcloud::PointCloud cloud;
  pointcloud::LabelArray labels;
  calib::CalibrationRig rig;
  std::vector<fusion::FeatureMap> maps;
  std::int64_t scene_id = 0;
};

/// Affine per-point classifier over fused features; scores are turned
/// into probabilities by exponential normalization.
struct ToyModel {
  int point_dims = 0;   // C1
  int cameras = 0;      // M
  int map_channels = 0; // C2
  int n_cls = 0;
  Eigen::MatrixXd weights;  // (C1 + M*C2 + 1) x n_cls, last row = bias

  Eigen::Index feature_dims() const {
    return point_dims + static_cast<Eigen::Index>(cameras) * map_channels;
  }
  losses::ProbDist predict_probs(const MatrixXfR& fused) const;
  pointcloud::LabelArray predict(const MatrixXfR& fused) const;
};

enum class Strategy { kBaseline, kDa, kKd, kLidarOnly };

Strategy strategy_from_string(const std::string& name);
std::string to_string(Strategy s);

struct TrainConfig {
  Strategy strategy = Strategy::kBaseline;
  calib::PerturbationLevel train_level{3};
  int epochs = 600;
  double learning_rate = 3.0;
  std::uint64_t seed = 0;
  losses::LossConfig loss;  // class_weights sized on first use when empty

  void validate() const;
};

/// Deterministic scene generation. The construction self-check requires
/// nearest-centroid mIoU >= 0.9 on true fused features and <= 0.75 on
/// geometric features alone; on failure the scene is regenerated with an
/// incremented sub-seed.
SyntheticScene gen_scene(std::uint64_t seed);

/// Per-point geometric features: scaled x, y, z, intensity, planar range.
MatrixXfR geometric_features(const pointcloud::PointCloud& cloud);

/// Projects with the given rig, samples all cameras and concatenates with
/// the geometric features. With camera_enabled = false the camera block
/// is exactly zero.
MatrixXfR build_fused_features(const pointcloud::PointCloud& cloud,
                               const std::vector<fusion::FeatureMap>& maps,
                               const calib::CalibrationRig& rig,
                               bool camera_enabled = true);
MatrixXfR build_fused_features(const SyntheticScene& scene,
                               const calib::CalibrationRig& rig,
                               bool camera_enabled = true);

/// Gradient descent on total_loss over fused features.
///   baseline:   true extrinsics, lambda2 = 0
///   da:         extrinsics perturbed at train_level, fresh noise each
///               epoch, lambda2 = 0
///   kd:         teacher probabilities from the same current weights on
///               well-calibrated features (no gradient), student on
///               perturbed features, full Eq.-style combined loss
///   lidar-only: baseline with the camera block zeroed
/// Deterministic given cfg.seed. Non-finite loss aborts with diagnostics.
ToyModel train(const std::vector<SyntheticScene>& scenes, const TrainConfig& cfg);

/// Benchmark predictor wrapping a model (camera block zeroed for models
/// trained lidar-only).
eval::Predictor make_predictor(const ToyModel& model, bool camera_enabled = true);

/// Nearest-centroid mIoU used by the scene self-check.
double centroid_miou(const MatrixXfR& features, const pointcloud::LabelArray& labels);

struct ModelSet {
  ToyModel baseline;
  ToyModel da;
  ToyModel kd;
  ToyModel lidar_only;
};

struct OrderingCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

struct OrderingReport {
  /// mIoU per model name per level 0..3.
  std::map<std::string, std::array<double, 4>> miou;
  std::vector<OrderingCheck> checks;
};

/// Runs the weak-calibration benchmark for all four models over levels
/// 0..3 and evaluates the pairwise ordering checks.
OrderingReport evaluate_ordering(const ModelSet& models,
                                 const std::vector<SyntheticScene>& scenes,
                                 std::uint64_t seed);

/// FLMD model file: magic "FLMD", version u16 (=1), point_dims u16,
/// cameras u16, map_channels u16, n_cls u16, then little-endian f32
/// weights, row-major. Unknown versions are rejected.
ToyModel load_model(const std::filesystem::path& path);
void save_model(const ToyModel& model, const std::filesystem::path& path);

}  // namespace fuselab::toytrain
