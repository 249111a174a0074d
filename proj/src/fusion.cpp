#include "fuselab/fusion.hpp"

#include <cmath>
#include <string>

#include "fuselab/detail/binio.hpp"
#include "fuselab/errors.hpp"

namespace fuselab::fusion {

namespace {
constexpr char kMagic[4] = {'F', 'L', 'F', 'M'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

void FeatureMap::validate() const {
  if (channels < 1 || height < 1 || width < 1)
    throw ValidationError("feature map needs positive channels and size");
  if (stride < 1) throw ValidationError("feature map stride must be >= 1");
  const std::size_t expected =
      static_cast<std::size_t>(channels) * height * width;
  if (data.size() != expected)
    throw ValidationError("feature map data size does not match its shape");
  for (float v : data)
    if (!std::isfinite(v))
      throw ValidationError("feature map has non-finite entries");
}

Eigen::VectorXd bilinear_sample(const FeatureMap& map, double u, double v) {
  if (!std::isfinite(u) || !std::isfinite(v))
    throw ValidationError("bilinear_sample needs finite coordinates");
  const int u0 = static_cast<int>(std::floor(u));
  const int v0 = static_cast<int>(std::floor(v));
  const double fu = u - u0;
  const double fv = v - v0;
  // Weight layout mirrors the four (p, q) neighbor offsets.
  const double w[4] = {(1.0 - fu) * (1.0 - fv), fu * (1.0 - fv),
                       (1.0 - fu) * fv, fu * fv};
  const int uu[4] = {u0, u0 + 1, u0, u0 + 1};
  const int vv[4] = {v0, v0, v0 + 1, v0 + 1};

  Eigen::VectorXd out = Eigen::VectorXd::Zero(map.channels);
  for (int k = 0; k < 4; ++k) {
    if (uu[k] < 0 || uu[k] >= map.width || vv[k] < 0 || vv[k] >= map.height)
      continue;  // zero padding outside the map
    if (w[k] == 0.0) continue;
    for (int c = 0; c < map.channels; ++c)
      out(c) += w[k] * static_cast<double>(map.at(c, vv[k], uu[k]));
  }
  return out;
}

MatrixXfR sample_all_cameras(
    const std::vector<FeatureMap>& maps,
    const std::vector<std::vector<calib::PixelProjection>>& projections) {
  if (maps.empty()) throw ValidationError("sample_all_cameras needs >= 1 map");
  if (projections.size() != maps.size())
    throw ValidationError("one projection list per camera is required");
  const int channels = maps[0].channels;
  const std::size_t n = projections[0].size();
  for (std::size_t j = 0; j < maps.size(); ++j) {
    maps[j].validate();
    if (maps[j].channels != channels)
      throw ValidationError("feature maps disagree on channel count");
    if (projections[j].size() != n)
      throw ValidationError("projection lists disagree on point count");
  }

  const int m = static_cast<int>(maps.size());
  MatrixXfR out = MatrixXfR::Zero(static_cast<Eigen::Index>(n),
                                  static_cast<Eigen::Index>(m) * channels);
  for (int j = 0; j < m; ++j) {
    const FeatureMap& map = maps[j];
    const double inv_stride = 1.0 / map.stride;
    const int plane = map.height * map.width;
    const float* base = map.data.data();
    for (std::size_t i = 0; i < n; ++i) {
      const calib::PixelProjection& p = projections[j][i];
      if (!p.valid) continue;  // out-of-view block stays exactly zero
      const double mu = p.u * inv_stride;
      const double mv = p.v * inv_stride;
      const int u0 = static_cast<int>(std::floor(mu));
      const int v0 = static_cast<int>(std::floor(mv));
      const double fu = mu - u0;
      const double fv = mv - v0;
      const double w[4] = {(1.0 - fu) * (1.0 - fv), fu * (1.0 - fv),
                           (1.0 - fu) * fv, fu * fv};
      const int uu[4] = {u0, u0 + 1, u0, u0 + 1};
      const int vv[4] = {v0, v0, v0 + 1, v0 + 1};
      float* row = out.data() +
                   static_cast<std::size_t>(i) * out.cols() +
                   static_cast<std::size_t>(j) * channels;
      // Gather the valid taps once, then sweep channels plane by plane.
      int taps = 0;
      std::size_t off[4];
      double tw[4];
      for (int k = 0; k < 4; ++k) {
        if (uu[k] < 0 || uu[k] >= map.width || vv[k] < 0 || vv[k] >= map.height)
          continue;
        if (w[k] == 0.0) continue;
        off[taps] = static_cast<std::size_t>(vv[k]) * map.width + uu[k];
        tw[taps] = w[k];
        ++taps;
      }
      for (int c = 0; c < channels; ++c) {
        const float* pl = base + static_cast<std::size_t>(c) * plane;
        double acc = 0.0;
        for (int k = 0; k < taps; ++k) acc += tw[k] * pl[off[k]];
        row[c] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

FusedPointFeatures fuse(const MatrixXfR& point_features,
                        const MatrixXfR& camera_features) {
  if (point_features.rows() != camera_features.rows())
    throw ValidationError("fuse: row counts differ");
  FusedPointFeatures out;
  out.n = point_features.rows();
  out.point_dims = point_features.cols();
  out.camera_dims = camera_features.cols();
  out.data.resize(out.n, out.dims());
  out.data.leftCols(out.point_dims) = point_features;
  out.data.rightCols(out.camera_dims) = camera_features;
  return out;
}

void save_feature_map(const FeatureMap& map, const std::filesystem::path& path) {
  map.validate();
  if (map.camera_id < 0 || map.camera_id > 0xFFFF ||
      map.channels > 0xFFFF || map.stride > 0xFFFF)
    throw ValidationError("feature map header field out of range");
  detail::ByteWriter w(path);
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.u16(static_cast<std::uint16_t>(map.camera_id));
  w.u16(static_cast<std::uint16_t>(map.channels));
  w.u32(static_cast<std::uint32_t>(map.height));
  w.u32(static_cast<std::uint32_t>(map.width));
  w.u16(static_cast<std::uint16_t>(map.stride));
  for (float v : map.data) w.f32(v);
  w.close();
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic(kMagic);
  const std::uint16_t version = r.u16("version");
  if (version != kVersion)
    throw FormatError("unknown FLFM version " + std::to_string(version) +
                      " in " + r.path());
  FeatureMap map;
  map.camera_id = r.u16("camera id");
  map.channels = r.u16("channel count");
  map.height = static_cast<int>(r.u32("height"));
  map.width = static_cast<int>(r.u32("width"));
  map.stride = r.u16("stride");
  if (map.channels < 1 || map.height < 1 || map.width < 1 || map.stride < 1)
    throw FormatError("malformed FLFM header in " + r.path());
  const std::size_t count =
      static_cast<std::size_t>(map.channels) * map.height * map.width;
  map.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) map.data[i] = r.f32("map data");
  if (!r.at_eof())
    throw FormatError("trailing bytes after payload in " + r.path());
  return map;
}

}  // namespace fuselab::fusion
