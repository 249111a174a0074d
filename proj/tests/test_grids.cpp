#include "fuselab/grids.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "fuselab/errors.hpp"
#include "fuselab/rng.hpp"

using namespace fuselab;
using namespace fuselab::grids;

namespace {

pointcloud::PointCloud cloud_from(const std::vector<Eigen::Vector3f>& pts) {
  pointcloud::PointCloud cloud;
  cloud.xyz.resize(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) cloud.xyz.col(i) = pts[i];
  cloud.intensity = Eigen::VectorXf::Zero(static_cast<Eigen::Index>(pts.size()));
  return cloud;
}

pointcloud::PointCloud random_cloud(int n, std::uint64_t seed, double span) {
  Rng rng(seed);
  std::vector<Eigen::Vector3f> pts;
  for (int i = 0; i < n; ++i)
    pts.emplace_back(static_cast<float>(rng.uniform(-span, span)),
                     static_cast<float>(rng.uniform(-span, span)),
                     static_cast<float>(rng.uniform(-4.0, 2.5)));
  return cloud_from(pts);
}

MatrixXfR random_features(int n, int channels, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXfR f(n, channels);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < channels; ++c)
      f(i, c) = static_cast<float>(rng.uniform(-3.0, 3.0));
  return f;
}

// Sequential hash-map-of-cells oracle for scatter.
GridTensor scatter_oracle(const MatrixXfR& features, const GridIndexMap& map,
                          Reduce reduce) {
  const int channels = static_cast<int>(features.cols());
  const std::size_t cells = static_cast<std::size_t>(map.rows) * map.cols;
  GridTensor grid;
  grid.channels = channels;
  grid.rows = map.rows;
  grid.cols = map.cols;
  grid.data.assign(static_cast<std::size_t>(channels) * cells, 0.0f);
  grid.occupied.assign(cells, 0);

  std::map<std::size_t, std::vector<int>> bins;
  for (std::size_t i = 0; i < map.n(); ++i)
    if (map.in_bounds[i])
      bins[static_cast<std::size_t>(map.row[i]) * map.cols + map.col[i]]
          .push_back(static_cast<int>(i));

  for (const auto& [cell, members] : bins) {
    grid.occupied[cell] = 1;
    for (int c = 0; c < channels; ++c) {
      if (reduce == Reduce::kMax) {
        float best = features(members[0], c);
        for (std::size_t k = 1; k < members.size(); ++k)
          best = std::max(best, features(members[k], c));
        grid.data[static_cast<std::size_t>(c) * cells + cell] = best;
      } else {
        double sum = 0.0;
        for (int idx : members) sum += static_cast<double>(features(idx, c));
        grid.data[static_cast<std::size_t>(c) * cells + cell] =
            static_cast<float>(sum / static_cast<double>(members.size()));
      }
    }
  }
  return grid;
}

// Four-term scalar oracle for gather.
MatrixXfR gather_oracle(const GridTensor& grid, const GridIndexMap& map) {
  const std::size_t cells = static_cast<std::size_t>(grid.rows) * grid.cols;
  MatrixXfR out = MatrixXfR::Zero(static_cast<Eigen::Index>(map.n()),
                                  grid.channels);
  for (std::size_t i = 0; i < map.n(); ++i) {
    if (!map.in_bounds[i]) continue;
    for (int c = 0; c < grid.channels; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k)
        acc += map.weight[i][k] *
               grid.data[static_cast<std::size_t>(c) * cells + map.nbr[i][k]];
      out(static_cast<Eigen::Index>(i), c) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace

TEST(BevSpecs, NuScenesCellSize) {
  const BevSpec spec = BevSpec::nuscenes();
  EXPECT_NEAR(spec.cell_x(), 0.2, 1e-12);
  EXPECT_NEAR(spec.cell_y(), 0.2, 1e-12);
  EXPECT_EQ(spec.cells_x, 512);
  EXPECT_EQ(spec.cells_y, 512);
}

TEST(BevSpecs, SemanticKittiPreset) {
  const BevSpec spec = BevSpec::semantic_kitti();
  EXPECT_EQ(spec.x_lo, -75.2);
  EXPECT_EQ(spec.x_hi, 75.2);
  EXPECT_EQ(spec.z_lo, -4.0);
  EXPECT_EQ(spec.z_hi, 2.0);
}

TEST(BevIndex, CellAssignment) {
  const BevSpec spec = BevSpec::nuscenes();
  const auto map = bev_index(
      cloud_from({{0.05f, 0.05f, 0.0f}, {60.0f, 0.0f, 0.0f}, {0.0f, 0.0f, 9.0f}}),
      spec);
  // floor((0.05 + 51.2) / 0.2) = 256
  EXPECT_TRUE(map.in_bounds[0]);
  EXPECT_EQ(map.col[0], 256);
  EXPECT_EQ(map.row[0], 256);
  EXPECT_FALSE(map.in_bounds[1]);  // x outside range
  EXPECT_FALSE(map.in_bounds[2]);  // z outside range
}

TEST(BevIndex, GatherWeightsSumToOne) {
  const BevSpec spec = BevSpec::nuscenes();
  const auto cloud = random_cloud(2000, 43, 60.0);  // some out of range
  const auto map = bev_index(cloud, spec);
  for (std::size_t i = 0; i < map.n(); ++i) {
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      EXPECT_GE(map.weight[i][k], 0.0);
      sum += map.weight[i][k];
    }
    if (map.in_bounds[i])
      EXPECT_NEAR(sum, 1.0, 1e-9);
    else
      EXPECT_EQ(sum, 0.0);
  }
}

TEST(BevIndex, CellCenterGathersPurelyFromOwnCell) {
  BevSpec spec;
  spec.x_lo = 0.0;
  spec.x_hi = 8.0;
  spec.y_lo = 0.0;
  spec.y_hi = 8.0;
  spec.z_lo = -1.0;
  spec.z_hi = 1.0;
  spec.cells_x = 8;
  spec.cells_y = 8;
  // center of cell (row 2, col 3) is at (3.5, 2.5)
  const auto map = bev_index(cloud_from({{3.5f, 2.5f, 0.0f}}), spec);
  ASSERT_TRUE(map.in_bounds[0]);
  EXPECT_EQ(map.row[0], 2);
  EXPECT_EQ(map.col[0], 3);
  EXPECT_NEAR(map.weight[0][0], 1.0, 1e-12);
  EXPECT_EQ(map.nbr[0][0], 2 * 8 + 3);
  for (int k = 1; k < 4; ++k) EXPECT_NEAR(map.weight[0][k], 0.0, 1e-12);
}

TEST(BevIndex, TranslationConsistency) {
  BevSpec spec;
  spec.x_lo = -8.0;
  spec.x_hi = 8.0;
  spec.y_lo = -8.0;
  spec.y_hi = 8.0;
  spec.z_lo = -2.0;
  spec.z_hi = 2.0;
  spec.cells_x = 64;
  spec.cells_y = 64;

  const double dx = 12.5, dy = -6.25;  // exactly representable offsets
  Rng rng(47);
  std::vector<Eigen::Vector3f> pts, shifted;
  for (int i = 0; i < 500; ++i) {
    // Coordinates on a 1/1024 lattice away from cell boundaries, so both
    // the f32 representation and the shifted f32 sum are exact.
    const double cell = 0.25;
    const double x = spec.x_lo + cell * (rng.next_u64() % 63) +
                     (32 + static_cast<double>(rng.next_u64() % 160)) / 1024.0;
    const double y = spec.y_lo + cell * (rng.next_u64() % 63) +
                     (32 + static_cast<double>(rng.next_u64() % 160)) / 1024.0;
    const double z = rng.uniform(-1.5, 1.5);
    pts.emplace_back(static_cast<float>(x), static_cast<float>(y),
                     static_cast<float>(z));
    shifted.emplace_back(static_cast<float>(x + dx), static_cast<float>(y + dy),
                         static_cast<float>(z));
  }
  BevSpec spec_shifted = spec;
  spec_shifted.x_lo += dx;
  spec_shifted.x_hi += dx;
  spec_shifted.y_lo += dy;
  spec_shifted.y_hi += dy;

  const auto a = bev_index(cloud_from(pts), spec);
  const auto b = bev_index(cloud_from(shifted), spec_shifted);
  for (std::size_t i = 0; i < a.n(); ++i) {
    EXPECT_EQ(a.in_bounds[i], b.in_bounds[i]);
    EXPECT_EQ(a.row[i], b.row[i]);
    EXPECT_EQ(a.col[i], b.col[i]);
    for (int k = 0; k < 4; ++k)
      EXPECT_NEAR(a.weight[i][k], b.weight[i][k], 1e-9);
  }
}

TEST(RvIndex, KnownColumnsAndRows) {
  RvSpec spec;
  spec.rows = 64;
  spec.cols = 2048;
  spec.elev_lo = -M_PI / 6.0;
  spec.elev_hi = M_PI / 12.0;
  const auto map = rv_index(
      cloud_from({{1.0f, 0.0f, 0.0f}, {0.0f, 0.0f, 1.0f}}), spec);
  ASSERT_TRUE(map.in_bounds[0]);
  EXPECT_EQ(map.col[0], 1024);  // azimuth 0 maps to mid-width
  // elevation 0: (hi - 0) / (hi - lo) * rows = (1/12) / (3/12) * 64 = 21.33
  EXPECT_EQ(map.row[0], 21);
  EXPECT_FALSE(map.in_bounds[1]);  // x = y = 0: azimuth undefined
}

TEST(RvIndex, ElevationBounds) {
  RvSpec spec;
  spec.rows = 16;
  spec.cols = 64;
  spec.elev_lo = -0.5;
  spec.elev_hi = 0.25;
  const float r = 10.0f;
  const float z_hi = r * std::tan(0.25f);
  const float z_lo = r * std::tan(-0.5f);
  const auto map = rv_index(cloud_from({{r, 0.0f, z_hi - 0.001f},
                                        {r, 0.0f, z_lo + 0.001f},
                                        {r, 0.0f, z_hi + 0.5f},
                                        {r, 0.0f, z_lo - 0.5f}}),
                            spec);
  EXPECT_TRUE(map.in_bounds[0]);
  EXPECT_EQ(map.row[0], 0);  // top row at highest elevation
  EXPECT_TRUE(map.in_bounds[1]);
  EXPECT_EQ(map.row[1], 15);
  EXPECT_FALSE(map.in_bounds[2]);
  EXPECT_FALSE(map.in_bounds[3]);
}

TEST(RvIndex, AzimuthWraparound) {
  RvSpec spec;
  spec.rows = 8;
  spec.cols = 128;
  // same direction expressed via azimuth and azimuth + 2*pi gives the same
  // xyz, hence identical cells
  const double az = 2.8;
  const float x1 = static_cast<float>(10.0 * std::cos(az));
  const float y1 = static_cast<float>(10.0 * std::sin(az));
  const float x2 = static_cast<float>(10.0 * std::cos(az + 2.0 * M_PI));
  const float y2 = static_cast<float>(10.0 * std::sin(az + 2.0 * M_PI));
  const auto map = rv_index(cloud_from({{x1, y1, 0.0f}, {x2, y2, 0.0f}}), spec);
  EXPECT_EQ(map.col[0], map.col[1]);
  EXPECT_EQ(map.row[0], map.row[1]);
}

TEST(RvIndex, ColumnShiftUnderExactRotation) {
  RvSpec spec;
  spec.rows = 16;
  spec.cols = 256;
  const int k = 13;
  const double theta = 2.0 * M_PI * k / spec.cols;
  Rng rng(53);
  std::vector<Eigen::Vector3f> pts, rotated;
  for (int i = 0; i < 400; ++i) {
    double az = rng.uniform(-M_PI, M_PI);
    // keep azimuth away from column boundaries
    const double col_cont = (az + M_PI) / (2.0 * M_PI) * spec.cols;
    if (std::abs(col_cont - std::round(col_cont)) < 0.05) {
      --i;
      continue;
    }
    const double r = rng.uniform(2.0, 30.0);
    const double z = rng.uniform(-2.0, 2.0);
    pts.emplace_back(static_cast<float>(r * std::cos(az)),
                     static_cast<float>(r * std::sin(az)),
                     static_cast<float>(z));
    rotated.emplace_back(static_cast<float>(r * std::cos(az + theta)),
                         static_cast<float>(r * std::sin(az + theta)),
                         static_cast<float>(z));
  }
  const auto a = rv_index(cloud_from(pts), spec);
  const auto b = rv_index(cloud_from(rotated), spec);
  for (std::size_t i = 0; i < a.n(); ++i) {
    if (!a.in_bounds[i] || !b.in_bounds[i]) continue;
    EXPECT_EQ((a.col[i] + k) % spec.cols, b.col[i]);
  }
}

TEST(Scatter, PlacementMaxAndMean) {
  BevSpec spec;
  spec.x_lo = 0.0;
  spec.x_hi = 4.0;
  spec.y_lo = 0.0;
  spec.y_hi = 4.0;
  spec.z_lo = -1.0;
  spec.z_hi = 1.0;
  spec.cells_x = 4;
  spec.cells_y = 4;
  // two points in cell (0, 0), one in cell (2, 3)
  const auto map = bev_index(
      cloud_from({{0.2f, 0.3f, 0.0f}, {0.7f, 0.6f, 0.0f}, {3.5f, 2.5f, 0.0f}}),
      spec);
  MatrixXfR features(3, 2);
  features << 1.0f, -2.0f, 3.0f, -5.0f, 7.0f, 8.0f;

  const GridTensor mx = scatter(features, map, Reduce::kMax);
  EXPECT_EQ(mx.at(0, 0, 0), 3.0f);   // max(1, 3)
  EXPECT_EQ(mx.at(1, 0, 0), -2.0f);  // max(-2, -5)
  EXPECT_EQ(mx.at(0, 2, 3), 7.0f);
  EXPECT_TRUE(mx.occupied[0]);
  EXPECT_FALSE(mx.occupied[1]);
  EXPECT_EQ(mx.at(0, 1, 1), 0.0f);  // empty cell stays zero

  const GridTensor mn = scatter(features, map, Reduce::kMean);
  EXPECT_EQ(mn.at(0, 0, 0), 2.0f);
  EXPECT_EQ(mn.at(1, 0, 0), -3.5f);
}

TEST(Scatter, MatchesOracleExactly) {
  const BevSpec spec = BevSpec::nuscenes();
  const auto cloud = random_cloud(5000, 59, 55.0);
  const auto map = bev_index(cloud, spec);
  const MatrixXfR features = random_features(5000, 7, 61);
  for (Reduce reduce : {Reduce::kMax, Reduce::kMean}) {
    const GridTensor expect = scatter_oracle(features, map, reduce);
    const GridTensor got = scatter(features, map, reduce);
    EXPECT_EQ(got.data, expect.data);
    EXPECT_EQ(got.occupied, expect.occupied);
  }
}

TEST(Scatter, ThreadCountInvariance) {
  const BevSpec spec = BevSpec::nuscenes();
  const auto cloud = random_cloud(8000, 67, 55.0);
  const auto map = bev_index(cloud, spec);
  const MatrixXfR features = random_features(8000, 5, 71);
  for (Reduce reduce : {Reduce::kMax, Reduce::kMean}) {
    const GridTensor t1 = scatter(features, map, reduce, 1);
    for (int threads : {4, 8}) {
      const GridTensor tn = scatter(features, map, reduce, threads);
      EXPECT_EQ(tn.data, t1.data);
      EXPECT_EQ(tn.occupied, t1.occupied);
    }
  }
}

TEST(Scatter, AllPointsOutOfBoundsIsEmptyGrid) {
  BevSpec spec;
  spec.x_lo = 100.0;
  spec.x_hi = 101.0;
  spec.y_lo = 100.0;
  spec.y_hi = 101.0;
  spec.cells_x = 4;
  spec.cells_y = 4;
  const auto map = bev_index(random_cloud(10, 73, 5.0), spec);
  const GridTensor grid = scatter(random_features(10, 3, 75), map, Reduce::kMax);
  for (float v : grid.data) EXPECT_EQ(v, 0.0f);
  for (auto o : grid.occupied) EXPECT_FALSE(o);
}

TEST(Gather, ConstantGridAndZeroOutOfBounds) {
  const BevSpec spec = BevSpec::nuscenes();
  const auto cloud = random_cloud(300, 77, 70.0);  // mixed in/out of range
  const auto map = bev_index(cloud, spec);
  GridTensor grid;
  grid.channels = 2;
  grid.rows = spec.cells_y;
  grid.cols = spec.cells_x;
  grid.data.assign(static_cast<std::size_t>(2) * 512 * 512, 3.5f);
  grid.occupied.assign(static_cast<std::size_t>(512) * 512, 1);
  const MatrixXfR out = gather(grid, map);
  for (std::size_t i = 0; i < map.n(); ++i) {
    for (int c = 0; c < 2; ++c) {
      if (map.in_bounds[i])
        EXPECT_NEAR(out(static_cast<Eigen::Index>(i), c), 3.5f, 1e-6);
      else
        EXPECT_EQ(out(static_cast<Eigen::Index>(i), c), 0.0f);
    }
  }
}

TEST(Gather, MatchesOracleAndThreadInvariant) {
  const BevSpec spec = BevSpec::nuscenes();
  const auto cloud = random_cloud(4000, 79, 55.0);
  const auto map = bev_index(cloud, spec);
  const GridTensor grid =
      scatter(random_features(4000, 6, 81), map, Reduce::kMax);
  const MatrixXfR expect = gather_oracle(grid, map);
  const MatrixXfR got1 = gather(grid, map, 1);
  EXPECT_EQ(got1, expect);
  for (int threads : {4, 8}) EXPECT_EQ(gather(grid, map, threads), got1);
}

TEST(Gather, ScatterGatherRecoversCellCenterFeature) {
  BevSpec spec;
  spec.x_lo = 0.0;
  spec.x_hi = 4.0;
  spec.y_lo = 0.0;
  spec.y_hi = 4.0;
  spec.cells_x = 4;
  spec.cells_y = 4;
  spec.z_lo = -1.0;
  spec.z_hi = 1.0;
  const auto map = bev_index(cloud_from({{1.5f, 2.5f, 0.0f}}), spec);
  MatrixXfR features(1, 3);
  features << 4.0f, -1.0f, 0.5f;
  const GridTensor grid = scatter(features, map, Reduce::kMax);
  const MatrixXfR back = gather(grid, map);
  EXPECT_NEAR(back(0, 0), 4.0f, 1e-6);
  EXPECT_NEAR(back(0, 1), -1.0f, 1e-6);
  EXPECT_NEAR(back(0, 2), 0.5f, 1e-6);
}

TEST(Gather, MeanScatterThenGatherConstantField) {
  BevSpec spec;
  spec.x_lo = 0.0;
  spec.x_hi = 16.0;
  spec.y_lo = 0.0;
  spec.y_hi = 16.0;
  spec.cells_x = 16;
  spec.cells_y = 16;
  spec.z_lo = -1.0;
  spec.z_hi = 1.0;
  const auto cloud = random_cloud(4000, 83, 7.5);
  pointcloud::PointCloud inside;
  inside.xyz = (cloud.xyz.array().abs()).matrix();  // fold into [0, 7.5]^2
  inside.xyz.row(2).setZero();
  inside.intensity = cloud.intensity;
  const auto map = bev_index(inside, spec);

  MatrixXfR features = MatrixXfR::Constant(inside.n(), 2, 1.75f);
  const GridTensor grid = scatter(features, map, Reduce::kMean);
  const MatrixXfR back = gather(grid, map);
  const std::size_t cells = static_cast<std::size_t>(16) * 16;
  for (std::size_t i = 0; i < map.n(); ++i) {
    if (!map.in_bounds[i]) continue;
    bool all_neighbors_occupied = true;
    for (int k = 0; k < 4; ++k)
      all_neighbors_occupied &= grid.occupied[map.nbr[i][k]] != 0;
    (void)cells;
    if (all_neighbors_occupied)
      EXPECT_NEAR(back(static_cast<Eigen::Index>(i), 0), 1.75f, 1e-6);
  }
}

TEST(GridErrors, ShapeAndSpecValidation) {
  BevSpec bad;
  bad.x_lo = 1.0;
  bad.x_hi = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  RvSpec bad_rv;
  bad_rv.rows = 0;
  EXPECT_THROW(bad_rv.validate(), ValidationError);

  const BevSpec spec = BevSpec::nuscenes();
  const auto map = bev_index(random_cloud(10, 85, 10.0), spec);
  EXPECT_THROW(scatter(random_features(9, 2, 87), map, Reduce::kMax),
               ValidationError);
  GridTensor wrong;
  wrong.channels = 2;
  wrong.rows = 100;
  wrong.cols = 100;
  wrong.data.assign(2 * 100 * 100, 0.0f);
  wrong.occupied.assign(100 * 100, 0);
  EXPECT_THROW(gather(wrong, map), ValidationError);
}
