#include "fuselab/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fuselab/errors.hpp"

namespace fuselab::overlay {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette = {{
    {230, 60, 60},    // red
    {60, 200, 90},    // green
    {70, 110, 240},   // blue
    {240, 200, 50},   // yellow
    {200, 80, 220},   // magenta
    {70, 210, 210},   // cyan
    {245, 140, 40},   // orange
    {235, 235, 235},  // white
}};

void put_pixel(Image& image, int x, int y, std::array<std::uint8_t, 3> color) {
  if (x < 0 || x >= image.width || y < 0 || y >= image.height) return;
  const std::size_t o = 3 * (static_cast<std::size_t>(y) * image.width + x);
  image.rgb[o] = color[0];
  image.rgb[o + 1] = color[1];
  image.rgb[o + 2] = color[2];
}

void draw_dot(Image& image, int cx, int cy, std::array<std::uint8_t, 3> color) {
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      if (dx * dx + dy * dy <= 2) put_pixel(image, cx + dx, cy + dy, color);
}

}  // namespace

std::array<std::uint8_t, 3> class_color(int cls) {
  return kPalette[static_cast<std::size_t>(cls < 0 ? -cls : cls) % kPalette.size()];
}

Image render_overlay(const pointcloud::PointCloud& cloud,
                     const std::optional<pointcloud::LabelArray>& labels,
                     const calib::CalibrationRig& rig, int camera, int level,
                     std::uint64_t seed, std::int64_t frame_id,
                     const fusion::FeatureMap* background) {
  rig.validate();
  if (camera < 0 || camera >= static_cast<int>(rig.camera_count()))
    throw ValidationError("overlay: camera index out of range");
  if (labels && static_cast<Eigen::Index>(labels->size()) != cloud.n())
    throw ValidationError("overlay: label count does not match cloud");
  const auto& cam = rig.cameras[camera];

  Image image;
  image.width = cam.width;
  image.height = cam.height;
  image.rgb.assign(static_cast<std::size_t>(cam.width) * cam.height * 3, 0);

  if (background != nullptr) {
    background->validate();
    // First channel, min-max normalized, upscaled by the map stride.
    float lo = background->data[0], hi = background->data[0];
    const int plane = background->height * background->width;
    for (int i = 0; i < plane; ++i) {
      lo = std::min(lo, background->data[i]);
      hi = std::max(hi, background->data[i]);
    }
    const float span = hi > lo ? hi - lo : 1.0f;
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        const int my = std::min(y / background->stride, background->height - 1);
        const int mx = std::min(x / background->stride, background->width - 1);
        const float v = (background->at(0, my, mx) - lo) / span;
        const auto g = static_cast<std::uint8_t>(30.0f + 170.0f * v);
        put_pixel(image, x, y, {g, g, g});
      }
    }
  } else {
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) {
        const bool dark = ((x / 16) + (y / 16)) % 2 == 0;
        const std::uint8_t g = dark ? 40 : 70;
        put_pixel(image, x, y, {g, g, g});
      }
  }

  calib::Extrinsics extr = cam.extrinsics;
  if (level != 0) {
    const auto spec = calib::sample_disturbance(
        calib::PerturbationLevel::from_int(level), seed, frame_id, camera);
    extr = calib::perturb_extrinsics(extr, spec);
  }
  const auto proj =
      calib::project_points(cloud, cam.intrinsics, extr, cam.width, cam.height);

  // Far-to-near dot order so near points overpaint.
  std::vector<std::size_t> order(proj.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return proj[a].depth > proj[b].depth;
  });
  for (std::size_t idx : order) {
    const auto& p = proj[idx];
    if (!p.valid) continue;
    const auto color =
        labels ? class_color(labels->labels[idx]) : kPalette.back();
    draw_dot(image, static_cast<int>(std::lround(p.u)),
             static_cast<int>(std::lround(p.v)), color);
  }
  return image;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open image for writing: " + path.string());
  out << "P3\n" << image.width << " " << image.height << "\n255\n";
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const auto px = image.pixel(x, y);
      out << int(px[0]) << ' ' << int(px[1]) << ' ' << int(px[2]);
      out << (x + 1 == image.width ? '\n' : ' ');
    }
  }
  if (!out) throw IoError("short write: " + path.string());
}

}  // namespace fuselab::overlay
