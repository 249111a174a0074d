#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fuselab/calib.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/pointcloud.hpp"

namespace fuselab::eval {

/// counts[g][p] = number of points with ground truth g predicted as p.
struct ConfusionMatrix {
  int n_cls = 0;
  std::vector<std::int64_t> counts;  // n_cls * n_cls, row-major by gt

  explicit ConfusionMatrix(int n_cls_ = 0)
      : n_cls(n_cls_),
        counts(static_cast<std::size_t>(n_cls_) * n_cls_, 0) {}

  std::int64_t at(int gt, int pred) const {
    return counts[static_cast<std::size_t>(gt) * n_cls + pred];
  }
  std::int64_t total() const;
};

/// Per-class IoU with undefined classes (zero denominator) excluded from
/// the mean. miou is empty when every class is undefined.
struct IoUReport {
  std::vector<double> per_class;   // valid only where defined[c]
  std::vector<bool> defined;
  std::optional<double> miou;
};

/// Increments counts from a batch; associative across batches.
void accumulate(ConfusionMatrix& cm, const pointcloud::LabelArray& gt,
                const pointcloud::LabelArray& pred);

/// IoU_c = TP_c / (TP_c + FP_c + FN_c) from the confusion matrix.
IoUReport miou(const ConfusionMatrix& cm);

/// One evaluation frame: cloud, ground truth, the true rig and the
/// per-camera feature maps.
struct BenchFrame {
  pointcloud::PointCloud cloud;
  pointcloud::LabelArray gt;
  calib::CalibrationRig rig;
  std::vector<fusion::FeatureMap> maps;
  std::int64_t frame_id = 0;
};

/// Frame-level prediction: (frame, rig-after-perturbation) -> labels.
using Predictor = std::function<pointcloud::LabelArray(
    const BenchFrame&, const calib::CalibrationRig&)>;

struct BenchmarkRun {
  std::vector<int> levels;
  std::uint64_t seed = 0;
  std::vector<IoUReport> reports;  // aligned with levels
};

/// Runs the predictor over every frame at every requested level,
/// perturbing each camera independently via sample_disturbance(level,
/// seed, frame_id, camera_id). Level 0 passes the original rig through
/// untouched. A predictor failure aborts with the offending frame id.
BenchmarkRun weak_calib_benchmark(const Predictor& predict,
                                  const std::vector<BenchFrame>& frames,
                                  const std::vector<int>& levels,
                                  std::uint64_t seed);

/// Applies per-camera sampled disturbances to a rig; exposed for callers
/// that need the same perturbation outside the benchmark loop.
calib::CalibrationRig perturb_rig(const calib::CalibrationRig& rig, int level,
                                  std::uint64_t seed, std::int64_t frame_id);

/// Serializes a run as a diff-friendly JSON document (sorted keys,
/// per-level per-class IoU and mIoU; undefined entries are null).
std::string report_to_json(const BenchmarkRun& run);
void write_report(const BenchmarkRun& run, const std::filesystem::path& path);

}  // namespace fuselab::eval
