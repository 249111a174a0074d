#include "fuselab/toytrain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "fuselab/detail/binio.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/rng.hpp"

namespace fuselab::toytrain {

namespace {

constexpr char kMagic[4] = {'F', 'L', 'M', 'D'};
constexpr std::uint16_t kVersion = 1;

// Substream tags.
constexpr std::uint64_t kSceneStream = 0x746f795f7363656eULL;
constexpr std::uint64_t kTrainNoiseStream = 0x746f795f6e6f6973ULL;

// Scene layout. Ground and wall are geometrically distinctive; each pole
// pair shares one geometry and differs only in its camera pattern. One
// feature-map cell spans stride/focal = 1.15 degrees, so the 3-degree
// twin offset keeps the pair separable under bilinear smear at level 0
// while a level-3 yaw draw (up to 4 degrees) can shift a pole's sample
// onto its twin.
constexpr int kImageWidth = 320;
constexpr int kImageHeight = 240;
constexpr int kStride = 8;
constexpr double kFocal = 400.0;
constexpr int kGroundPoints = 1800;
constexpr int kWallPoints = 800;
constexpr int kPolePairs = 6;
constexpr int kPolePoints = 110;
constexpr double kTwinOffsetDeg = 3.0;
constexpr double kPairSlotDeg = 4.0;  // azimuth slots keep pairs disjoint
constexpr double kPatternAmp = 2.0;
constexpr double kMapNoiseSigma = 0.16;
constexpr double kFusedCentroidFloor = 0.9;
constexpr double kGeomCentroidCeil = 0.75;
constexpr int kMaxSceneAttempts = 50;

calib::CalibrationRig make_scene_rig() {
  calib::CalibrationRig rig;
  const double yaw[2] = {6.0 * M_PI / 180.0, -6.0 * M_PI / 180.0};
  const double lateral[2] = {0.4, -0.4};
  for (int j = 0; j < kSceneCameras; ++j) {
    // Camera basis in LiDAR coordinates: x right, y down, z forward.
    const Eigen::Vector3d forward(std::cos(yaw[j]), std::sin(yaw[j]), 0.0);
    const Eigen::Vector3d right(std::sin(yaw[j]), -std::cos(yaw[j]), 0.0);
    const Eigen::Vector3d down(0.0, 0.0, -1.0);
    Eigen::Matrix3d rot;
    rot.row(0) = right;
    rot.row(1) = down;
    rot.row(2) = forward;
    const Eigen::Vector3d center(0.0, lateral[j], 1.4);
    calib::CameraConfig cam;
    cam.intrinsics = calib::CameraIntrinsics::from_pinhole(
        kFocal, kFocal, kImageWidth / 2.0, kImageHeight / 2.0);
    cam.extrinsics = calib::Extrinsics::from_rt(rot, -rot * center);
    cam.width = kImageWidth;
    cam.height = kImageHeight;
    rig.cameras.push_back(cam);
  }
  return rig;
}

std::vector<Eigen::VectorXd> make_patterns(Rng& rng) {
  Eigen::MatrixXd gauss(kSceneChannels, kSceneChannels);
  for (int r = 0; r < kSceneChannels; ++r)
    for (int c = 0; c < kSceneChannels; ++c) gauss(r, c) = rng.normal();
  const Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
  std::vector<Eigen::VectorXd> patterns(kSceneClasses);
  for (int k = 0; k < kSceneClasses; ++k) patterns[k] = kPatternAmp * q.col(k);
  return patterns;
}

SyntheticScene build_scene(std::uint64_t sub_seed) {
  Rng rng(sub_seed);
  SyntheticScene scene;
  scene.rig = make_scene_rig();
  const auto patterns = make_patterns(rng);

  std::vector<Eigen::Vector3f> pts;
  std::vector<int> labels;
  pts.reserve(kGroundPoints + kWallPoints + 2 * kPolePairs * kPolePoints);

  // Splatting has no occlusion handling, so each class keeps its own
  // sight sector: ground fills the low image rows in front of the wall,
  // raised poles sit in the central azimuth band above the ground rows,
  // and the wall occupies two side sectors.
  const double deg = M_PI / 180.0;

  // Ground plane. Quadratic shaping puts more samples at near range
  // where image rows are sparse.
  for (int i = 0; i < kGroundPoints; ++i) {
    const double u = rng.uniform();
    const double x = 4.8 + 11.7 * u * u;
    const double y = rng.uniform(-0.4, 0.4) * x;
    const double z = rng.normal(0.0, 0.02);
    pts.emplace_back(x, y, z);
    labels.push_back(0);
  }

  // Wall segments on both azimuth flanks, behind the ground region.
  const double wall_x = rng.uniform(17.0, 21.0);
  for (int i = 0; i < kWallPoints; ++i) {
    const double az = rng.uniform(15.0, 24.0) * (i % 2 == 0 ? 1.0 : -1.0) * deg;
    const double x = wall_x + rng.normal(0.0, 0.05);
    const double y = x * std::tan(az);
    const double z = rng.uniform(0.0, 3.2);
    pts.emplace_back(x, y, z);
    labels.push_back(3);
  }

  // Twin pole pairs: same geometry, classes told apart only by camera
  // pattern. Pairs sit in disjoint azimuth slots inside the overlap zone
  // of both cameras.
  for (int pair = 0; pair < kPolePairs; ++pair) {
    const double az =
        (-10.0 + kPairSlotDeg * pair + rng.uniform(-0.4, 0.4)) * deg;
    const double px = rng.uniform(7.0, 13.0);
    const double side = rng.bernoulli() ? 1.0 : -1.0;
    const double az_twin = az + side * kTwinOffsetDeg * deg;
    const bool swap = rng.bernoulli();
    const int cls_a = swap ? 2 : 1;
    const int cls_b = swap ? 1 : 2;
    for (int which = 0; which < 2; ++which) {
      const double cy = px * std::tan(which == 0 ? az : az_twin);
      const int cls = which == 0 ? cls_a : cls_b;
      for (int i = 0; i < kPolePoints; ++i) {
        const double x = px + rng.normal(0.0, 0.03);
        const double y = cy + rng.normal(0.0, 0.03);
        const double z = rng.uniform(0.6, 2.6);
        pts.emplace_back(x, y, z);
        labels.push_back(cls);
      }
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  scene.cloud.xyz.resize(3, n);
  for (Eigen::Index i = 0; i < n; ++i) scene.cloud.xyz.col(i) = pts[i];
  scene.cloud.intensity.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    scene.cloud.intensity(i) = static_cast<float>(rng.uniform(0.25, 0.75));
  scene.labels.labels = std::move(labels);
  scene.labels.n_cls = kSceneClasses;

  // Render camera features: splat each visible point's class pattern with
  // bilinear weights, average per cell, then add dense noise.
  const int map_h = kImageHeight / kStride;
  const int map_w = kImageWidth / kStride;
  for (int cam = 0; cam < kSceneCameras; ++cam) {
    const auto& cc = scene.rig.cameras[cam];
    const auto proj = calib::project_points(scene.cloud, cc.intrinsics,
                                            cc.extrinsics, cc.width, cc.height);
    std::vector<double> sum(static_cast<std::size_t>(kSceneChannels) * map_h * map_w, 0.0);
    std::vector<double> wsum(static_cast<std::size_t>(map_h) * map_w, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!proj[i].valid) continue;
      const double mu = proj[i].u / kStride;
      const double mv = proj[i].v / kStride;
      const int u0 = static_cast<int>(std::floor(mu));
      const int v0 = static_cast<int>(std::floor(mv));
      const double fu = mu - u0;
      const double fv = mv - v0;
      const double w[4] = {(1.0 - fu) * (1.0 - fv), fu * (1.0 - fv),
                           (1.0 - fu) * fv, fu * fv};
      const int uu[4] = {u0, u0 + 1, u0, u0 + 1};
      const int vv[4] = {v0, v0, v0 + 1, v0 + 1};
      const Eigen::VectorXd& pat = patterns[scene.labels.labels[i]];
      for (int k = 0; k < 4; ++k) {
        if (uu[k] < 0 || uu[k] >= map_w || vv[k] < 0 || vv[k] >= map_h) continue;
        const std::size_t cell = static_cast<std::size_t>(vv[k]) * map_w + uu[k];
        wsum[cell] += w[k];
        for (int c = 0; c < kSceneChannels; ++c)
          sum[static_cast<std::size_t>(c) * map_h * map_w + cell] += w[k] * pat(c);
      }
    }
    fusion::FeatureMap map;
    map.camera_id = cam;
    map.channels = kSceneChannels;
    map.height = map_h;
    map.width = map_w;
    map.stride = kStride;
    map.data.resize(static_cast<std::size_t>(kSceneChannels) * map_h * map_w);
    for (int c = 0; c < kSceneChannels; ++c) {
      for (int y = 0; y < map_h; ++y) {
        for (int x = 0; x < map_w; ++x) {
          const std::size_t cell = static_cast<std::size_t>(y) * map_w + x;
          const double base =
              wsum[cell] > 1e-9
                  ? sum[static_cast<std::size_t>(c) * map_h * map_w + cell] / wsum[cell]
                  : 0.0;
          map.at(c, y, x) =
              static_cast<float>(base + rng.normal(0.0, kMapNoiseSigma));
        }
      }
    }
    scene.maps.push_back(std::move(map));
  }
  return scene;
}

losses::ProbDist softmax_rows(const Eigen::MatrixXd& scores) {
  losses::ProbDist out;
  out.p.resize(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    Eigen::RowVectorXd e = (scores.row(i).array() - m).exp();
    out.p.row(i) = e / e.sum();
  }
  return out;
}

// dL/dscores from dL/dprobs through row-wise softmax.
Eigen::MatrixXd softmax_backward(const losses::ProbDist& probs,
                                 const Eigen::MatrixXd& grad_p) {
  Eigen::MatrixXd dz(probs.p.rows(), probs.p.cols());
  for (Eigen::Index i = 0; i < probs.p.rows(); ++i) {
    const double dot = grad_p.row(i).dot(probs.p.row(i));
    dz.row(i) = (probs.p.row(i).array() * (grad_p.row(i).array() - dot)).matrix();
  }
  return dz;
}

}  // namespace

Strategy strategy_from_string(const std::string& name) {
  if (name == "baseline") return Strategy::kBaseline;
  if (name == "da") return Strategy::kDa;
  if (name == "kd") return Strategy::kKd;
  if (name == "lidar-only") return Strategy::kLidarOnly;
  throw ValidationError("unknown strategy '" + name + "'");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kBaseline: return "baseline";
    case Strategy::kDa: return "da";
    case Strategy::kKd: return "kd";
    case Strategy::kLidarOnly: return "lidar-only";
  }
  throw ValidationError("unknown strategy value");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train config needs epochs >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("train config needs a positive learning rate");
  calib::PerturbationLevel::from_int(train_level.level);
}

MatrixXfR geometric_features(const pointcloud::PointCloud& cloud) {
  cloud.validate();
  MatrixXfR out(cloud.n(), kGeomDims);
  for (Eigen::Index i = 0; i < cloud.n(); ++i) {
    const float x = cloud.xyz(0, i);
    const float y = cloud.xyz(1, i);
    const float z = cloud.xyz(2, i);
    out(i, 0) = x / 48.0f;
    out(i, 1) = y / 24.0f;
    out(i, 2) = z / 6.4f;
    out(i, 3) = cloud.intensity(i) * 0.5f;
    out(i, 4) = std::hypot(x, y) / 52.0f;
  }
  return out;
}

MatrixXfR build_fused_features(const pointcloud::PointCloud& cloud,
                               const std::vector<fusion::FeatureMap>& maps,
                               const calib::CalibrationRig& rig,
                               bool camera_enabled) {
  if (maps.size() != rig.camera_count())
    throw ValidationError("one feature map per rig camera is required");
  const MatrixXfR geom = geometric_features(cloud);
  const Eigen::Index cam_dims =
      static_cast<Eigen::Index>(maps.size()) * (maps.empty() ? 0 : maps[0].channels);
  MatrixXfR cam_feats;
  if (camera_enabled) {
    std::vector<std::vector<calib::PixelProjection>> projections;
    projections.reserve(maps.size());
    for (std::size_t j = 0; j < maps.size(); ++j) {
      const auto& cc = rig.cameras[j];
      projections.push_back(calib::project_points(cloud, cc.intrinsics,
                                                  cc.extrinsics, cc.width,
                                                  cc.height));
    }
    cam_feats = fusion::sample_all_cameras(maps, projections);
  } else {
    cam_feats = MatrixXfR::Zero(cloud.n(), cam_dims);
  }
  return fusion::fuse(geom, cam_feats).data;
}

MatrixXfR build_fused_features(const SyntheticScene& scene,
                               const calib::CalibrationRig& rig,
                               bool camera_enabled) {
  return build_fused_features(scene.cloud, scene.maps, rig, camera_enabled);
}

namespace {

eval::IoUReport centroid_report(const MatrixXfR& features,
                                const pointcloud::LabelArray& labels) {
  labels.validate();
  if (static_cast<Eigen::Index>(labels.size()) != features.rows())
    throw ValidationError("centroid_miou: label count mismatch");
  const int n_cls = labels.n_cls;
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(n_cls, features.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_cls);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    centroids.row(labels.labels[i]) += features.row(i).cast<double>();
    counts(labels.labels[i]) += 1.0;
  }
  for (int c = 0; c < n_cls; ++c)
    if (counts(c) > 0.0) centroids.row(c) /= counts(c);

  pointcloud::LabelArray pred;
  pred.n_cls = n_cls;
  pred.labels.resize(labels.size());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const Eigen::RowVectorXd f = features.row(i).cast<double>();
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n_cls; ++c) {
      if (counts(c) == 0.0) continue;
      const double d = (f - centroids.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    pred.labels[i] = best;
  }
  eval::ConfusionMatrix cm(n_cls);
  eval::accumulate(cm, labels, pred);
  return eval::miou(cm);
}

}  // namespace

double centroid_miou(const MatrixXfR& features, const pointcloud::LabelArray& labels) {
  return centroid_report(features, labels).miou.value_or(0.0);
}

SyntheticScene gen_scene(std::uint64_t seed) {
  for (int attempt = 0; attempt < kMaxSceneAttempts; ++attempt) {
    SyntheticScene scene =
        build_scene(Rng::mix(Rng::mix(seed, kSceneStream), attempt));
    const MatrixXfR fused = build_fused_features(scene, scene.rig, true);
    const MatrixXfR geom = geometric_features(scene.cloud);
    const double fused_miou = centroid_miou(fused, scene.labels);
    const double geom_miou = centroid_miou(geom, scene.labels);
    if (fused_miou >= kFusedCentroidFloor && geom_miou <= kGeomCentroidCeil)
      return scene;
  }
  throw Error("gen_scene: no attempt satisfied the separability invariant");
}

losses::ProbDist ToyModel::predict_probs(const MatrixXfR& fused) const {
  if (fused.cols() != feature_dims())
    throw ValidationError("model expects " + std::to_string(feature_dims()) +
                          " feature dims, got " + std::to_string(fused.cols()));
  Eigen::MatrixXd x(fused.rows(), fused.cols() + 1);
  x.leftCols(fused.cols()) = fused.cast<double>();
  x.col(fused.cols()).setOnes();
  return softmax_rows(x * weights);
}

pointcloud::LabelArray ToyModel::predict(const MatrixXfR& fused) const {
  const losses::ProbDist probs = predict_probs(fused);
  pointcloud::LabelArray out;
  out.n_cls = n_cls;
  out.labels.resize(probs.n());
  for (Eigen::Index i = 0; i < probs.n(); ++i) {
    Eigen::Index best;
    probs.p.row(i).maxCoeff(&best);
    out.labels[i] = static_cast<int>(best);
  }
  return out;
}

ToyModel train(const std::vector<SyntheticScene>& scenes, const TrainConfig& cfg) {
  cfg.validate();
  if (scenes.empty()) throw ValidationError("train needs >= 1 scene");

  const int n_cls = scenes.front().labels.n_cls;
  const int cameras = static_cast<int>(scenes.front().maps.size());
  const int channels = scenes.front().maps.front().channels;
  for (const auto& s : scenes) {
    if (s.labels.n_cls != n_cls ||
        static_cast<int>(s.maps.size()) != cameras ||
        s.maps.front().channels != channels)
      throw ValidationError("train: scenes disagree on layout");
  }

  losses::LossConfig loss_cfg = cfg.loss;
  if (loss_cfg.class_weights.size() == 0)
    loss_cfg.class_weights = Eigen::VectorXd::Ones(n_cls);
  loss_cfg.validate(n_cls);

  const bool camera_on = cfg.strategy != Strategy::kLidarOnly;
  const bool perturbed =
      cfg.strategy == Strategy::kDa || cfg.strategy == Strategy::kKd;
  const bool distill = cfg.strategy == Strategy::kKd;
  if (!distill) loss_cfg.lambda2 = 0.0;

  // Stack all scenes; the camera block is rewritten per epoch for the
  // perturbed strategies, everything else is fixed.
  Eigen::Index total = 0;
  for (const auto& s : scenes) total += s.cloud.n();
  const int feat_dims = kGeomDims + cameras * channels;
  Eigen::MatrixXd x(total, feat_dims + 1);
  Eigen::MatrixXd x_clean(0, 0);
  pointcloud::LabelArray labels;
  labels.n_cls = n_cls;
  labels.labels.reserve(total);

  Eigen::Index row = 0;
  for (const auto& s : scenes) {
    const MatrixXfR fused = build_fused_features(s, s.rig, camera_on);
    x.block(row, 0, s.cloud.n(), feat_dims) = fused.cast<double>();
    row += s.cloud.n();
    labels.labels.insert(labels.labels.end(), s.labels.labels.begin(),
                         s.labels.labels.end());
  }
  x.col(feat_dims).setOnes();
  if (distill) x_clean = x;

  ToyModel model;
  model.point_dims = kGeomDims;
  model.cameras = cameras;
  model.map_channels = channels;
  model.n_cls = n_cls;
  model.weights = Eigen::MatrixXd::Zero(feat_dims + 1, n_cls);

  // Tail average of the iterates; under per-epoch calibration noise the
  // averaged weights sit near the mean-loss optimum instead of wherever
  // the last noisy step happened to land.
  Eigen::MatrixXd weight_sum = Eigen::MatrixXd::Zero(feat_dims + 1, n_cls);
  int averaged = 0;
  const int tail_start = cfg.epochs / 2;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (perturbed) {
      // Fresh calibration noise each epoch, sampled per scene and camera.
      const std::uint64_t epoch_seed =
          Rng::mix(Rng::mix(cfg.seed, kTrainNoiseStream),
                   static_cast<std::uint64_t>(epoch));
      Eigen::Index at = 0;
      for (std::size_t si = 0; si < scenes.size(); ++si) {
        const auto& s = scenes[si];
        calib::CalibrationRig rig = s.rig;
        for (int cam = 0; cam < cameras; ++cam) {
          const auto spec = calib::sample_disturbance(
              cfg.train_level, epoch_seed, static_cast<std::int64_t>(si), cam);
          rig.cameras[cam].extrinsics =
              calib::perturb_extrinsics(rig.cameras[cam].extrinsics, spec);
        }
        const MatrixXfR fused = build_fused_features(s, rig, true);
        x.block(at, kGeomDims, s.cloud.n(), cameras * channels) =
            fused.rightCols(cameras * channels).cast<double>();
        at += s.cloud.n();
      }
    }

    if (!model.weights.allFinite())
      throw Error("training diverged: non-finite weights at epoch " +
                  std::to_string(epoch) + " (strategy " +
                  to_string(cfg.strategy) + ", lr " +
                  std::to_string(cfg.learning_rate) + ")");
    const losses::ProbDist student = softmax_rows(x * model.weights);
    double loss_value = 0.0;
    Eigen::MatrixXd dw;
    if (distill) {
      // Shared weights, two passes. The well-calibrated pass is the
      // teacher branch and carries the segmentation loss; the perturbed
      // pass is distilled toward the detached teacher outputs.
      const losses::ProbDist teacher = softmax_rows(x_clean * model.weights);
      const auto ce = losses::weighted_ce(teacher, labels, loss_cfg);
      const auto lz = losses::lovasz_softmax(teacher, labels);
      const auto kd = losses::kd_loss(teacher, student, labels, loss_cfg);
      loss_value = loss_cfg.lambda1 * (ce.value + lz.value) +
                   loss_cfg.lambda2 * kd.value;
      const Eigen::MatrixXd dz_teacher =
          softmax_backward(teacher, loss_cfg.lambda1 * (ce.grad + lz.grad));
      const Eigen::MatrixXd dz_student =
          softmax_backward(student, loss_cfg.lambda2 * kd.grad);
      dw = x_clean.transpose() * dz_teacher + x.transpose() * dz_student;
    } else {
      const auto loss = losses::total_loss(student, student, labels, loss_cfg);
      loss_value = loss.value;
      dw = x.transpose() * softmax_backward(student, loss.grad);
    }
    if (!std::isfinite(loss_value))
      throw Error("training diverged: non-finite loss at epoch " +
                  std::to_string(epoch) + " (strategy " +
                  to_string(cfg.strategy) + ", lr " +
                  std::to_string(cfg.learning_rate) + ")");

    // Cosine-annealed step size keeps the terminal iterates stable under
    // the per-epoch calibration noise of the perturbed strategies.
    const double lr =
        cfg.learning_rate * 0.5 *
        (1.0 + std::cos(M_PI * static_cast<double>(epoch) / cfg.epochs));
    model.weights -= lr * dw;
    if (epoch >= tail_start) {
      weight_sum += model.weights;
      ++averaged;
    }
  }
  if (averaged > 0) model.weights = weight_sum / averaged;
  return model;
}

eval::Predictor make_predictor(const ToyModel& model, bool camera_enabled) {
  ToyModel copy = model;
  return [copy, camera_enabled](const eval::BenchFrame& frame,
                                const calib::CalibrationRig& rig) {
    const MatrixXfR fused =
        build_fused_features(frame.cloud, frame.maps, rig, camera_enabled);
    return copy.predict(fused);
  };
}

OrderingReport evaluate_ordering(const ModelSet& models,
                                 const std::vector<SyntheticScene>& scenes,
                                 std::uint64_t seed) {
  std::vector<eval::BenchFrame> frames;
  frames.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    eval::BenchFrame f;
    f.cloud = scenes[i].cloud;
    f.gt = scenes[i].labels;
    f.rig = scenes[i].rig;
    f.maps = scenes[i].maps;
    f.frame_id = static_cast<std::int64_t>(i);
    frames.push_back(std::move(f));
  }
  const std::vector<int> levels{0, 1, 2, 3};

  OrderingReport report;
  const auto run_model = [&](const std::string& name, const ToyModel& model,
                             bool camera_enabled) {
    const auto run = eval::weak_calib_benchmark(
        make_predictor(model, camera_enabled), frames, levels, seed);
    std::array<double, 4> by_level{};
    for (int l = 0; l < 4; ++l) by_level[l] = run.reports[l].miou.value_or(0.0);
    report.miou[name] = by_level;
  };
  run_model("baseline", models.baseline, true);
  run_model("da", models.da, true);
  run_model("kd", models.kd, true);
  run_model("lidar_only", models.lidar_only, false);

  const auto& base = report.miou["baseline"];
  const auto& da = report.miou["da"];
  const auto& kd = report.miou["kd"];
  const double lidar = report.miou["lidar_only"][0];

  const auto check = [&](const std::string& name, double lhs, double rhs,
                         bool pass) {
    report.checks.push_back({name, lhs, rhs, pass});
  };
  check("lidar_only_flat_across_levels", report.miou["lidar_only"][3],
        report.miou["lidar_only"][0],
        report.miou["lidar_only"][0] == report.miou["lidar_only"][1] &&
            report.miou["lidar_only"][1] == report.miou["lidar_only"][2] &&
            report.miou["lidar_only"][2] == report.miou["lidar_only"][3]);
  check("baseline_L0_beats_lidar_by_0.05", base[0], lidar + 0.05,
        base[0] > lidar + 0.05);
  check("baseline_L3_below_lidar", base[3], lidar, base[3] < lidar);
  check("da_L3_beats_baseline_L3_by_0.03", da[3], base[3] + 0.03,
        da[3] > base[3] + 0.03);
  check("da_L0_below_baseline_L0", da[0], base[0], da[0] < base[0]);
  check("kd_L0_at_least_da_L0", kd[0], da[0], kd[0] >= da[0]);
  check("kd_L3_beats_baseline_L3_by_0.03", kd[3], base[3] + 0.03,
        kd[3] >= base[3] + 0.03);
  return report;
}

void save_model(const ToyModel& model, const std::filesystem::path& path) {
  if (model.point_dims < 0 || model.cameras < 0 || model.map_channels < 0 ||
      model.n_cls < 1)
    throw ValidationError("model header fields out of range");
  if (model.weights.rows() != model.feature_dims() + 1 ||
      model.weights.cols() != model.n_cls)
    throw ValidationError("model weight shape does not match its header");
  detail::ByteWriter w(path);
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.u16(static_cast<std::uint16_t>(model.point_dims));
  w.u16(static_cast<std::uint16_t>(model.cameras));
  w.u16(static_cast<std::uint16_t>(model.map_channels));
  w.u16(static_cast<std::uint16_t>(model.n_cls));
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c)
      w.f32(static_cast<float>(model.weights(r, c)));
  w.close();
}

ToyModel load_model(const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic(kMagic);
  const std::uint16_t version = r.u16("version");
  if (version != kVersion)
    throw FormatError("unknown FLMD version " + std::to_string(version) +
                      " in " + r.path());
  ToyModel model;
  model.point_dims = r.u16("point dims");
  model.cameras = r.u16("camera count");
  model.map_channels = r.u16("map channels");
  model.n_cls = r.u16("class count");
  if (model.n_cls < 1) throw FormatError("malformed FLMD header in " + r.path());
  model.weights.resize(model.feature_dims() + 1, model.n_cls);
  for (Eigen::Index row = 0; row < model.weights.rows(); ++row)
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c)
      model.weights(row, c) = r.f32("weights");
  if (!r.at_eof())
    throw FormatError("trailing bytes after payload in " + r.path());
  return model;
}

}  // namespace fuselab::toytrain
