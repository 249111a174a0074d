#include "fuselab/pointcloud.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "fuselab/detail/binio.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/rng.hpp"

namespace fuselab::pointcloud {

namespace {
constexpr char kMagic[4] = {'F', 'L', 'P', 'C'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint16_t kFlagLabels = 1u << 0;
constexpr std::uint16_t kFlagIntensity = 1u << 1;
}  // namespace

void PointCloud::validate() const {
  if (n() < 1) throw ValidationError("point cloud is empty");
  if (!xyz.allFinite()) throw ValidationError("point cloud has non-finite coordinates");
  if (intensity.size() != n())
    throw ValidationError("intensity size does not match point count");
  if (!intensity.allFinite())
    throw ValidationError("point cloud has non-finite intensity");
}

void LabelArray::validate() const {
  if (n_cls < 1) throw ValidationError("label array needs n_cls >= 1");
  for (int v : labels) {
    if (v < 0 || v >= n_cls)
      throw ValidationError("label " + std::to_string(v) + " outside [0, " +
                            std::to_string(n_cls) + ")");
  }
}

void AugmentationConfig::validate() const {
  if (!(scale_lo > 0.0) || !(scale_lo <= scale_hi))
    throw ValidationError("augmentation scale range needs 0 < lo <= hi");
  if (!(jitter_sigma >= 0.0) || !std::isfinite(jitter_sigma))
    throw ValidationError("jitter sigma must be finite and >= 0");
}

AugmentResult augment(const PointCloud& cloud, const AugmentationConfig& cfg,
                      std::uint64_t seed) {
  cfg.validate();
  cloud.validate();
  Rng rng(seed);

  double sx = 1.0, sy = 1.0;
  if (cfg.flip_x) sx = rng.bernoulli() ? -1.0 : 1.0;
  if (cfg.flip_y) sy = rng.bernoulli() ? -1.0 : 1.0;
  double scale = 1.0;
  if (cfg.scale_lo != 1.0 || cfg.scale_hi != 1.0)
    scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
  double angle = 0.0;
  if (cfg.rotate_z) angle = rng.uniform(0.0, 2.0 * M_PI);

  Eigen::Matrix4d transform = Eigen::Matrix4d::Identity();
  transform(0, 0) = sx * scale;
  transform(1, 1) = sy * scale;
  transform(2, 2) = scale;
  if (cfg.rotate_z) {
    Eigen::Matrix4d rot = Eigen::Matrix4d::Identity();
    const double c = std::cos(angle), s = std::sin(angle);
    rot(0, 0) = c;
    rot(0, 1) = -s;
    rot(1, 0) = s;
    rot(1, 1) = c;
    transform = rot * transform;
  }

  AugmentResult out;
  out.transform = transform;
  out.cloud = cloud;
  const Eigen::Matrix3d linear = transform.topLeftCorner<3, 3>();
  for (Eigen::Index i = 0; i < cloud.n(); ++i) {
    Eigen::Vector3d p = cloud.xyz.col(i).cast<double>();
    p = linear * p;
    if (cfg.jitter_sigma > 0.0) {
      p.x() += rng.normal(0.0, cfg.jitter_sigma);
      p.y() += rng.normal(0.0, cfg.jitter_sigma);
      p.z() += rng.normal(0.0, cfg.jitter_sigma);
    }
    out.cloud.xyz.col(i) = p.cast<float>();
  }
  return out;
}

void save_cloud(const PointCloud& cloud, const std::optional<LabelArray>& labels,
                const std::filesystem::path& path) {
  cloud.validate();
  if (labels) {
    labels->validate();
    if (static_cast<Eigen::Index>(labels->size()) != cloud.n())
      throw ValidationError("label count does not match point count");
    for (int v : labels->labels)
      if (v > 0xFFFF) throw ValidationError("label does not fit in u16");
  }

  detail::ByteWriter w(path);
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.u64(static_cast<std::uint64_t>(cloud.n()));
  std::uint16_t flags = 0;
  if (labels) flags |= kFlagLabels;
  if (cloud.has_intensity) flags |= kFlagIntensity;
  w.u16(flags);
  for (Eigen::Index i = 0; i < cloud.n(); ++i) {
    w.f32(cloud.xyz(0, i));
    w.f32(cloud.xyz(1, i));
    w.f32(cloud.xyz(2, i));
    if (cloud.has_intensity) w.f32(cloud.intensity(i));
  }
  if (labels)
    for (int v : labels->labels) w.u16(static_cast<std::uint16_t>(v));
  w.close();
}

LoadedCloud load_cloud(const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic(kMagic);
  const std::uint16_t version = r.u16("version");
  if (version != kVersion)
    throw FormatError("unknown FLPC version " + std::to_string(version) +
                      " in " + r.path());
  const std::uint64_t count = r.u64("point count");
  if (count == 0) throw FormatError("FLPC file with zero points: " + r.path());
  const std::uint16_t flags = r.u16("flags");
  const bool has_labels = flags & kFlagLabels;
  const bool has_intensity = flags & kFlagIntensity;
  if (flags & ~(kFlagLabels | kFlagIntensity))
    throw FormatError("unknown FLPC flags in " + r.path());

  LoadedCloud out;
  out.cloud.has_intensity = has_intensity;
  out.cloud.xyz.resize(3, static_cast<Eigen::Index>(count));
  out.cloud.intensity = Eigen::VectorXf::Zero(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    out.cloud.xyz(0, i) = r.f32("point record");
    out.cloud.xyz(1, i) = r.f32("point record");
    out.cloud.xyz(2, i) = r.f32("point record");
    if (has_intensity) out.cloud.intensity(i) = r.f32("point record");
  }
  if (has_labels) {
    LabelArray la;
    la.labels.resize(count);
    int max_label = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
      la.labels[i] = r.u16("label record");
      max_label = std::max(max_label, la.labels[i]);
    }
    la.n_cls = max_label + 1;
    out.labels = std::move(la);
  }
  if (!r.at_eof())
    throw FormatError("trailing bytes after payload in " + r.path());
  return out;
}

}  // namespace fuselab::pointcloud
