#include "fuselab/calib.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fuselab/errors.hpp"
#include "fuselab/rng.hpp"

namespace fuselab::calib {

namespace {

// Stream tag separating disturbance sampling from other users of a seed.
constexpr std::uint64_t kDisturbanceStream = 0x6c63665f64697374ULL;

Eigen::Matrix3d rot_x(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Eigen::Matrix3d rot_y(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Eigen::Matrix3d rot_z(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

constexpr double kDegToRad = M_PI / 180.0;

}  // namespace

CameraIntrinsics CameraIntrinsics::from_pinhole(double fx, double fy, double cx,
                                                double cy) {
  CameraIntrinsics intr;
  intr.m.setZero();
  intr.m(0, 0) = fx;
  intr.m(1, 1) = fy;
  intr.m(0, 2) = cx;
  intr.m(1, 2) = cy;
  intr.m(2, 2) = 1.0;
  intr.validate();
  return intr;
}

void CameraIntrinsics::validate() const {
  if (!m.allFinite()) throw ValidationError("intrinsics has non-finite entries");
  if (!(fx() > 0.0) || !(fy() > 0.0))
    throw ValidationError("intrinsics needs fx > 0 and fy > 0");
  const Eigen::RowVector4d bottom = m.row(2);
  if (std::abs(bottom(0)) > 1e-12 || std::abs(bottom(1)) > 1e-12 ||
      std::abs(bottom(2) - 1.0) > 1e-12 || std::abs(bottom(3)) > 1e-12)
    throw ValidationError("intrinsics bottom row must be (0, 0, 1, 0)");
}

Extrinsics Extrinsics::from_rt(const Eigen::Matrix3d& rotation,
                               const Eigen::Vector3d& translation) {
  Extrinsics e;
  e.m.setIdentity();
  e.m.topLeftCorner<3, 3>() = rotation;
  e.m.topRightCorner<3, 1>() = translation;
  e.validate();
  return e;
}

void Extrinsics::validate() const {
  if (!m.allFinite()) throw ValidationError("extrinsics has non-finite entries");
  const Eigen::RowVector4d bottom = m.row(3);
  if (std::abs(bottom(0)) > 1e-12 || std::abs(bottom(1)) > 1e-12 ||
      std::abs(bottom(2)) > 1e-12 || std::abs(bottom(3) - 1.0) > 1e-12)
    throw ValidationError("extrinsics bottom row must be (0, 0, 0, 1)");
  const Eigen::Matrix3d r = rotation();
  const Eigen::Matrix3d gram = r.transpose() * r - Eigen::Matrix3d::Identity();
  if (gram.cwiseAbs().maxCoeff() > 1e-9)
    throw ValidationError("extrinsics rotation is not orthonormal");
  if (std::abs(r.determinant() - 1.0) > 1e-9)
    throw ValidationError("extrinsics rotation determinant is not 1");
}

void CalibrationRig::validate() const {
  if (cameras.empty()) throw ValidationError("rig needs at least one camera");
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const CameraConfig& cam = cameras[i];
    try {
      cam.intrinsics.validate();
      cam.extrinsics.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("camera " + std::to_string(i) + ": " + e.what());
    }
    if (cam.width <= 0 || cam.height <= 0)
      throw ValidationError("camera " + std::to_string(i) +
                            ": image dimensions must be positive");
  }
}

void DisturbanceSpec::validate() const {
  for (double a : {rx_deg, ry_deg, rz_deg}) {
    if (!std::isfinite(a))
      throw ValidationError("disturbance angle must be finite");
    if (std::abs(a) > 45.0)
      throw ValidationError("disturbance angle exceeds 45 degree sanity bound");
  }
}

PerturbationLevel PerturbationLevel::from_int(int level) {
  if (level < 0 || level > 3)
    throw ValidationError("perturbation level must be in {0, 1, 2, 3}");
  return PerturbationLevel{level};
}

double PerturbationLevel::range_deg() const {
  switch (level) {
    case 0: return 0.0;
    case 1: return 1.0;
    case 2: return 2.0;
    case 3: return 4.0;
    default:
      throw ValidationError("perturbation level must be in {0, 1, 2, 3}");
  }
}

Eigen::Matrix4d compose_disturbance(const DisturbanceSpec& spec) {
  for (double a : {spec.rx_deg, spec.ry_deg, spec.rz_deg})
    if (!std::isfinite(a))
      throw ValidationError("disturbance angle must be finite");
  Eigen::Matrix4d e = Eigen::Matrix4d::Identity();
  e.topLeftCorner<3, 3>() = rot_x(spec.rx_deg * kDegToRad) *
                            rot_y(spec.ry_deg * kDegToRad) *
                            rot_z(spec.rz_deg * kDegToRad);
  return e;
}

Extrinsics perturb_extrinsics(const Extrinsics& t, const DisturbanceSpec& spec) {
  t.validate();
  Extrinsics out;
  out.m = t.m * compose_disturbance(spec);
  return out;
}

DisturbanceSpec sample_disturbance(PerturbationLevel level, std::uint64_t seed,
                                   std::int64_t frame_id, int camera_id) {
  const double range = level.range_deg();
  if (level.level == 0) return {};
  Rng rng(Rng::mix(Rng::mix(Rng::mix(seed, kDisturbanceStream),
                            static_cast<std::uint64_t>(frame_id)),
                   static_cast<std::uint64_t>(camera_id)));
  DisturbanceSpec spec;
  spec.rx_deg = rng.uniform(-range, range);
  spec.ry_deg = rng.uniform(-range, range);
  spec.rz_deg = rng.uniform(-range, range);
  return spec;
}

std::vector<PixelProjection> project_points(const pointcloud::PointCloud& points,
                                            const CameraIntrinsics& intr,
                                            const Extrinsics& extr, int width,
                                            int height) {
  points.validate();
  if (width <= 0 || height <= 0)
    throw ValidationError("projection needs positive image dimensions");
  const Eigen::Matrix<double, 3, 4> p = intr.m * extr.m;

  std::vector<PixelProjection> out(points.n());
  for (Eigen::Index i = 0; i < points.n(); ++i) {
    const double x = points.xyz(0, i);
    const double y = points.xyz(1, i);
    const double z = points.xyz(2, i);
    const double h0 = p(0, 0) * x + p(0, 1) * y + p(0, 2) * z + p(0, 3);
    const double h1 = p(1, 0) * x + p(1, 1) * y + p(1, 2) * z + p(1, 3);
    const double h2 = p(2, 0) * x + p(2, 1) * y + p(2, 2) * z + p(2, 3);
    PixelProjection& pp = out[i];
    pp.depth = h2;
    if (h2 <= kMinProjectionDepth) {
      pp.valid = false;
      continue;
    }
    pp.u = h0 / h2;
    pp.v = h1 / h2;
    pp.valid = pp.u >= 0.0 && pp.u < width && pp.v >= 0.0 && pp.v < height;
  }
  return out;
}

namespace {

nlohmann::json camera_to_json(const CameraConfig& cam) {
  nlohmann::json j;
  std::vector<double> intr(12), extr(16);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) intr[r * 4 + c] = cam.intrinsics.m(r, c);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) extr[r * 4 + c] = cam.extrinsics.m(r, c);
  j["intrinsics"] = intr;
  j["extrinsics"] = extr;
  j["width"] = cam.width;
  j["height"] = cam.height;
  return j;
}

CameraConfig camera_from_json(const nlohmann::json& j, std::size_t index) {
  const std::string where = "camera " + std::to_string(index);
  if (!j.is_object()) throw FormatError("rig: " + where + " is not an object");
  for (const char* key : {"intrinsics", "extrinsics", "width", "height"})
    if (!j.contains(key))
      throw FormatError("rig: " + where + " missing key '" + key + "'");
  const auto& ji = j.at("intrinsics");
  const auto& je = j.at("extrinsics");
  if (!ji.is_array() || ji.size() != 12)
    throw FormatError("rig: " + where + " intrinsics must hold 12 numbers");
  if (!je.is_array() || je.size() != 16)
    throw FormatError("rig: " + where + " extrinsics must hold 16 numbers");
  CameraConfig cam;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      cam.intrinsics.m(r, c) = ji.at(r * 4 + c).get<double>();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      cam.extrinsics.m(r, c) = je.at(r * 4 + c).get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  return cam;
}

}  // namespace

CalibrationRig load_rig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rig file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("rig: invalid JSON in " + path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("cameras") || !j["cameras"].is_array())
    throw FormatError("rig: missing 'cameras' array in " + path.string());
  CalibrationRig rig;
  std::size_t idx = 0;
  for (const auto& jc : j["cameras"]) rig.cameras.push_back(camera_from_json(jc, idx++));
  rig.validate();
  return rig;
}

void save_rig(const CalibrationRig& rig, const std::filesystem::path& path) {
  rig.validate();
  nlohmann::json j;
  j["cameras"] = nlohmann::json::array();
  for (const CameraConfig& cam : rig.cameras) j["cameras"].push_back(camera_to_json(cam));
  std::ofstream out(path);
  if (!out) throw IoError("cannot open rig file for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write: " + path.string());
}

}  // namespace fuselab::calib
