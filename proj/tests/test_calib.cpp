#include "fuselab/calib.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "fuselab/errors.hpp"
#include "fuselab/rng.hpp"

using namespace fuselab;
using namespace fuselab::calib;

namespace {

constexpr double kDeg = M_PI / 180.0;

// Independent scalar oracle: per-axis rotation matrices composed by a
// plain triple loop, no Eigen.
void axis_rotation(int axis, double rad, double out[3][3]) {
  const double c = std::cos(rad), s = std::sin(rad);
  double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const int a = (axis + 1) % 3, b = (axis + 2) % 3;
  m[a][a] = c;
  m[a][b] = -s;
  m[b][a] = s;
  m[b][b] = c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i][j] = m[i][j];
}

void matmul3(const double a[3][3], const double b[3][3], double out[3][3]) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      out[i][j] = 0.0;
      for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
    }
}

pointcloud::PointCloud one_point(double x, double y, double z) {
  pointcloud::PointCloud cloud;
  cloud.xyz.resize(3, 1);
  cloud.xyz.col(0) = Eigen::Vector3f(static_cast<float>(x),
                                     static_cast<float>(y),
                                     static_cast<float>(z));
  cloud.intensity = Eigen::VectorXf::Zero(1);
  return cloud;
}

Extrinsics random_extrinsics(Rng& rng) {
  const DisturbanceSpec spec{rng.uniform(-45.0, 45.0), rng.uniform(-45.0, 45.0),
                             rng.uniform(-45.0, 45.0)};
  Eigen::Matrix4d m = compose_disturbance(spec);
  m(0, 3) = rng.uniform(-2.0, 2.0);
  m(1, 3) = rng.uniform(-2.0, 2.0);
  m(2, 3) = rng.uniform(-2.0, 2.0);
  Extrinsics e;
  e.m = m;
  return e;
}

}  // namespace

TEST(ComposeDisturbance, ZeroAnglesIsIdentity) {
  const Eigen::Matrix4d e = compose_disturbance({0.0, 0.0, 0.0});
  EXPECT_TRUE(e.isApprox(Eigen::Matrix4d::Identity(), 0.0));
}

TEST(ComposeDisturbance, CanonicalXRotation) {
  // 90 degrees about X maps +Y to +Z (right-handed).
  const Eigen::Matrix4d e = compose_disturbance({90.0, 0.0, 0.0});
  const Eigen::Vector3d mapped = e.topLeftCorner<3, 3>() * Eigen::Vector3d(0, 1, 0);
  EXPECT_NEAR(mapped.x(), 0.0, 1e-12);
  EXPECT_NEAR(mapped.y(), 0.0, 1e-12);
  EXPECT_NEAR(mapped.z(), 1.0, 1e-12);
}

TEST(ComposeDisturbance, MatchesPerAxisOracle) {
  const DisturbanceSpec spec{1.0, 2.0, 3.0};
  const Eigen::Matrix4d e = compose_disturbance(spec);

  double rx[3][3], ry[3][3], rz[3][3], tmp[3][3], prod[3][3];
  axis_rotation(0, 1.0 * kDeg, rx);
  axis_rotation(1, 2.0 * kDeg, ry);
  axis_rotation(2, 3.0 * kDeg, rz);
  matmul3(ry, rz, tmp);
  matmul3(rx, tmp, prod);

  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(e(i, j), prod[i][j], 1e-12);
  EXPECT_EQ(e(0, 3), 0.0);
  EXPECT_EQ(e(1, 3), 0.0);
  EXPECT_EQ(e(2, 3), 0.0);
}

TEST(ComposeDisturbance, RandomSpecsStayOrthonormal) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const DisturbanceSpec spec{rng.uniform(-45.0, 45.0),
                               rng.uniform(-45.0, 45.0),
                               rng.uniform(-45.0, 45.0)};
    const Eigen::Matrix4d e = compose_disturbance(spec);
    const Eigen::Matrix3d r = e.topLeftCorner<3, 3>();
    const Eigen::Matrix3d gram = r.transpose() * r - Eigen::Matrix3d::Identity();
    EXPECT_LT(gram.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
  }
}

TEST(ComposeDisturbance, RejectsNonFiniteAngles) {
  EXPECT_THROW(compose_disturbance({std::nan(""), 0.0, 0.0}), ValidationError);
  EXPECT_THROW(compose_disturbance({0.0, INFINITY, 0.0}), ValidationError);
}

TEST(DisturbanceSpecType, SanityBound) {
  DisturbanceSpec ok{4.0, -4.0, 4.0};
  EXPECT_NO_THROW(ok.validate());
  DisturbanceSpec big{0.0, 0.0, 46.0};
  EXPECT_THROW(big.validate(), ValidationError);
  DisturbanceSpec nan_spec{std::nan(""), 0.0, 0.0};
  EXPECT_THROW(nan_spec.validate(), ValidationError);
}

TEST(PerturbExtrinsics, ZeroAnglesIsIdentityOperation) {
  Rng rng(11);
  const Extrinsics t = random_extrinsics(rng);
  const Extrinsics p = perturb_extrinsics(t, {0.0, 0.0, 0.0});
  EXPECT_LT((p.m - t.m).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PerturbExtrinsics, IdentityAbsorption) {
  const DisturbanceSpec spec{3.0, -2.0, 1.0};
  const Extrinsics p = perturb_extrinsics(Extrinsics::identity(), spec);
  EXPECT_TRUE(p.m.isApprox(compose_disturbance(spec), 1e-15));
}

TEST(PerturbExtrinsics, TranslationColumnUnchanged) {
  Extrinsics t;
  t.m.topRightCorner<3, 1>() = Eigen::Vector3d(1.0, 2.0, 3.0);
  const DisturbanceSpec spec{1.0, 1.0, 1.0};
  const Extrinsics p = perturb_extrinsics(t, spec);

  // 4x4 product oracle.
  const Eigen::Matrix4d expected = t.m * compose_disturbance(spec);
  EXPECT_LT((p.m - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(p.m(0, 3), 1.0);
  EXPECT_EQ(p.m(1, 3), 2.0);
  EXPECT_EQ(p.m(2, 3), 3.0);
}

TEST(PerturbExtrinsics, RotationStaysOrthonormal) {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const Extrinsics t = random_extrinsics(rng);
    const DisturbanceSpec spec{rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0),
                               rng.uniform(-4.0, 4.0)};
    const Extrinsics p = perturb_extrinsics(t, spec);
    const Eigen::Matrix3d r = p.rotation();
    EXPECT_LT((r.transpose() * r - Eigen::Matrix3d::Identity())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-9);
  }
}

TEST(SampleDisturbance, LevelZeroIsAlwaysZero) {
  for (std::uint64_t seed : {0ull, 1ull, 99999ull}) {
    const DisturbanceSpec spec =
        sample_disturbance(PerturbationLevel::from_int(0), seed, 17, 3);
    EXPECT_EQ(spec.rx_deg, 0.0);
    EXPECT_EQ(spec.ry_deg, 0.0);
    EXPECT_EQ(spec.rz_deg, 0.0);
  }
}

TEST(SampleDisturbance, LevelRangesMatchTable) {
  EXPECT_EQ(PerturbationLevel::from_int(0).range_deg(), 0.0);
  EXPECT_EQ(PerturbationLevel::from_int(1).range_deg(), 1.0);
  EXPECT_EQ(PerturbationLevel::from_int(2).range_deg(), 2.0);
  EXPECT_EQ(PerturbationLevel::from_int(3).range_deg(), 4.0);
  EXPECT_THROW(PerturbationLevel::from_int(4), ValidationError);
  EXPECT_THROW(PerturbationLevel::from_int(-1), ValidationError);
}

TEST(SampleDisturbance, DeterministicAndStreamSeparated) {
  const auto lvl = PerturbationLevel::from_int(1);
  const DisturbanceSpec a = sample_disturbance(lvl, 42, 5, 0);
  const DisturbanceSpec b = sample_disturbance(lvl, 42, 5, 0);
  EXPECT_EQ(a.rx_deg, b.rx_deg);
  EXPECT_EQ(a.ry_deg, b.ry_deg);
  EXPECT_EQ(a.rz_deg, b.rz_deg);

  const DisturbanceSpec c = sample_disturbance(lvl, 42, 5, 1);
  EXPECT_TRUE(a.rx_deg != c.rx_deg || a.ry_deg != c.ry_deg ||
              a.rz_deg != c.rz_deg);
  const DisturbanceSpec d = sample_disturbance(lvl, 42, 6, 0);
  EXPECT_TRUE(a.rx_deg != d.rx_deg || a.ry_deg != d.ry_deg ||
              a.rz_deg != d.rz_deg);
  const DisturbanceSpec e = sample_disturbance(lvl, 43, 5, 0);
  EXPECT_TRUE(a.rx_deg != e.rx_deg || a.ry_deg != e.ry_deg ||
              a.rz_deg != e.rz_deg);
}

TEST(SampleDisturbance, LevelsFormNestedRanges) {
  const double bounds[4] = {0.0, 1.0, 2.0, 4.0};
  for (int level = 0; level <= 3; ++level) {
    double max_abs = 0.0;
    const auto lvl = PerturbationLevel::from_int(level);
    for (int frame = 0; frame < 2000; ++frame) {
      const DisturbanceSpec s = sample_disturbance(lvl, 1234, frame, 0);
      max_abs = std::max({max_abs, std::abs(s.rx_deg), std::abs(s.ry_deg),
                          std::abs(s.rz_deg)});
    }
    EXPECT_LE(max_abs, bounds[level]);
    if (level > 0) EXPECT_GT(max_abs, 0.9 * bounds[level]);  // range coverage
  }
}

TEST(ProjectPoints, UnitFocalPinhole) {
  const auto intr = CameraIntrinsics::from_pinhole(1.0, 1.0, 0.0, 0.0);
  const auto proj =
      project_points(one_point(2.0, 4.0, 2.0), intr, Extrinsics::identity(), 10, 10);
  ASSERT_EQ(proj.size(), 1u);
  EXPECT_TRUE(proj[0].valid);
  EXPECT_NEAR(proj[0].u, 1.0, 1e-12);
  EXPECT_NEAR(proj[0].v, 2.0, 1e-12);
  EXPECT_NEAR(proj[0].depth, 2.0, 1e-12);
}

TEST(ProjectPoints, BehindCameraIsInvalid) {
  const auto intr = CameraIntrinsics::from_pinhole(100.0, 100.0, 50.0, 50.0);
  const auto proj =
      project_points(one_point(0.0, 0.0, -1.0), intr, Extrinsics::identity(), 100, 100);
  EXPECT_FALSE(proj[0].valid);
  EXPECT_LT(proj[0].depth, 0.0);
}

TEST(ProjectPoints, MatchesScalarOracle) {
  Rng rng(23);
  const auto intr = CameraIntrinsics::from_pinhole(
      rng.uniform(50.0, 500.0), rng.uniform(50.0, 500.0), rng.uniform(0.0, 300.0),
      rng.uniform(0.0, 300.0));
  const Extrinsics extr = random_extrinsics(rng);
  const int width = 640, height = 480;

  pointcloud::PointCloud cloud;
  cloud.xyz.resize(3, 100);
  for (int i = 0; i < 100; ++i)
    cloud.xyz.col(i) =
        Eigen::Vector3f(static_cast<float>(rng.uniform(-10.0, 10.0)),
                        static_cast<float>(rng.uniform(-10.0, 10.0)),
                        static_cast<float>(rng.uniform(-10.0, 10.0)));
  cloud.intensity = Eigen::VectorXf::Zero(100);

  const auto proj = project_points(cloud, intr, extr, width, height);
  ASSERT_EQ(proj.size(), 100u);  // invalid points flagged, never dropped

  for (int i = 0; i < 100; ++i) {
    // Explicit scalar multiply-then-divide oracle.
    const double p[4] = {cloud.xyz(0, i), cloud.xyz(1, i), cloud.xyz(2, i), 1.0};
    double cam[4] = {0, 0, 0, 0};
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) cam[r] += extr.m(r, c) * p[c];
    double h[3] = {0, 0, 0};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) h[r] += intr.m(r, c) * cam[c];
    EXPECT_NEAR(proj[i].depth, h[2], 1e-9);
    if (h[2] <= kMinProjectionDepth) {
      EXPECT_FALSE(proj[i].valid);
      continue;
    }
    const double u = h[0] / h[2], v = h[1] / h[2];
    EXPECT_NEAR(proj[i].u, u, 1e-9);
    EXPECT_NEAR(proj[i].v, v, 1e-9);
    EXPECT_EQ(proj[i].valid,
              u >= 0.0 && u < width && v >= 0.0 && v < height);
    if (proj[i].valid) EXPECT_GT(proj[i].depth, 0.0);
  }
}

TEST(ProjectPoints, PerturbationAssociativity) {
  // Projecting with T*E equals projecting the E-rotated point with T. The
  // right-hand side runs in scalar double arithmetic so the rotated
  // intermediate point is not truncated to the cloud's f32 storage.
  Rng rng(31);
  const auto intr = CameraIntrinsics::from_pinhole(200.0, 220.0, 160.0, 120.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Extrinsics t = random_extrinsics(rng);
    const DisturbanceSpec spec{rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0),
                               rng.uniform(-4.0, 4.0)};
    const Eigen::Matrix4d e = compose_disturbance(spec);
    // f32-representable input point
    const float px = static_cast<float>(rng.uniform(-5.0, 5.0));
    const float py = static_cast<float>(rng.uniform(-5.0, 5.0));
    const float pz = static_cast<float>(rng.uniform(1.0, 10.0));
    const Eigen::Vector3d rotated =
        e.topLeftCorner<3, 3>() * Eigen::Vector3d(px, py, pz);

    const auto left = project_points(one_point(px, py, pz), intr,
                                     perturb_extrinsics(t, spec), 320, 240);

    const Eigen::Vector4d hom(rotated.x(), rotated.y(), rotated.z(), 1.0);
    const Eigen::Vector3d h = intr.m * (t.m * hom);
    EXPECT_NEAR(left[0].depth, h(2), 1e-9);
    if (h(2) > kMinProjectionDepth) {
      EXPECT_NEAR(left[0].u, h(0) / h(2), 1e-9);
      EXPECT_NEAR(left[0].v, h(1) / h(2), 1e-9);
    }
  }
}

TEST(Validation, IntrinsicsInvariants) {
  EXPECT_THROW(CameraIntrinsics::from_pinhole(0.0, 1.0, 0.0, 0.0),
               ValidationError);
  EXPECT_THROW(CameraIntrinsics::from_pinhole(1.0, -2.0, 0.0, 0.0),
               ValidationError);
  CameraIntrinsics intr = CameraIntrinsics::from_pinhole(100.0, 100.0, 50.0, 50.0);
  intr.m(2, 0) = 0.5;  // break projective normalization
  EXPECT_THROW(intr.validate(), ValidationError);
}

TEST(Validation, ExtrinsicsInvariants) {
  Extrinsics e;
  e.m(0, 0) = 2.0;  // not orthonormal
  EXPECT_THROW(e.validate(), ValidationError);

  Extrinsics reflection;
  reflection.m(0, 0) = -1.0;  // det = -1
  EXPECT_THROW(reflection.validate(), ValidationError);

  Extrinsics bad_bottom;
  bad_bottom.m(3, 0) = 1e-3;
  EXPECT_THROW(bad_bottom.validate(), ValidationError);
}

TEST(Validation, RigInvariants) {
  CalibrationRig empty;
  EXPECT_THROW(empty.validate(), ValidationError);

  CalibrationRig rig;
  CameraConfig cam;
  cam.intrinsics = CameraIntrinsics::from_pinhole(100.0, 100.0, 50.0, 50.0);
  cam.width = 0;
  cam.height = 100;
  rig.cameras.push_back(cam);
  EXPECT_THROW(rig.validate(), ValidationError);
}

TEST(RigFile, ExactRoundTrip) {
  Rng rng(41);
  CalibrationRig rig;
  for (int j = 0; j < 3; ++j) {
    CameraConfig cam;
    cam.intrinsics = CameraIntrinsics::from_pinhole(
        rng.uniform(100.0, 900.0), rng.uniform(100.0, 900.0),
        rng.uniform(100.0, 700.0), rng.uniform(100.0, 500.0));
    cam.extrinsics = random_extrinsics(rng);
    cam.width = 1600;
    cam.height = 900;
    rig.cameras.push_back(cam);
  }
  const auto path = std::filesystem::temp_directory_path() / "fuselab_rig_rt.json";
  save_rig(rig, path);
  const CalibrationRig loaded = load_rig(path);

  ASSERT_EQ(loaded.camera_count(), rig.camera_count());
  for (std::size_t j = 0; j < rig.cameras.size(); ++j) {
    EXPECT_EQ(loaded.cameras[j].intrinsics.m, rig.cameras[j].intrinsics.m);
    EXPECT_EQ(loaded.cameras[j].extrinsics.m, rig.cameras[j].extrinsics.m);
    EXPECT_EQ(loaded.cameras[j].width, rig.cameras[j].width);
    EXPECT_EQ(loaded.cameras[j].height, rig.cameras[j].height);
  }
  std::filesystem::remove(path);
}

TEST(RigFile, Errors) {
  EXPECT_THROW(load_rig("/nonexistent/rig.json"), IoError);

  const auto path = std::filesystem::temp_directory_path() / "fuselab_rig_bad.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  EXPECT_THROW(load_rig(path), FormatError);
  {
    std::ofstream out(path);
    out << "{\"cameras\": [{\"intrinsics\": [1,2,3], \"extrinsics\": [], "
           "\"width\": 1, \"height\": 1}]}";
  }
  EXPECT_THROW(load_rig(path), FormatError);
  {
    std::ofstream out(path);
    out << "{\"no_cameras\": 1}";
  }
  EXPECT_THROW(load_rig(path), FormatError);
  std::filesystem::remove(path);
}
