#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fuselab/pointcloud.hpp"
#include "fuselab/types.hpp"

namespace fuselab::grids {

/// Bird's-eye-view grid over x (columns) and y (rows); z bounds filter
/// points but do not index.
struct BevSpec {
  double x_lo = -51.2, x_hi = 51.2;
  double y_lo = -51.2, y_hi = 51.2;
  double z_lo = -5.0, z_hi = 3.0;
  int cells_x = 512;
  int cells_y = 512;

  double cell_x() const { return (x_hi - x_lo) / cells_x; }
  double cell_y() const { return (y_hi - y_lo) / cells_y; }
  void validate() const;

  static BevSpec nuscenes();         // [-51.2, 51.2], z [-5, 3], 512x512
  static BevSpec semantic_kitti();   // [-75.2, 75.2], z [-4, 2], 512x512
};

/// Range-view grid: columns span the full azimuth circle [-pi, pi) and
/// wrap; rows span the elevation range with the top row at the highest
/// elevation.
struct RvSpec {
  int rows = 64;
  int cols = 2048;
  double elev_lo = -30.0 * M_PI / 180.0;
  double elev_hi = 10.0 * M_PI / 180.0;

  void validate() const;
};

/// Per-point cell assignment plus bilinear grid-to-point gather support.
/// For an in-bounds point the four gather weights sum to 1; out-of-bounds
/// points carry zero weights. Neighbor cells are stored as linear indices
/// row*cols + col, already clamped (BEV) or azimuth-wrapped (RV).
struct GridIndexMap {
  int rows = 0;
  int cols = 0;
  std::vector<std::int32_t> row;                 // nearest cell, scatter target
  std::vector<std::int32_t> col;
  std::vector<std::uint8_t> in_bounds;
  std::vector<std::array<std::int32_t, 4>> nbr;  // gather neighbors
  std::vector<std::array<double, 4>> weight;     // gather weights

  std::size_t n() const { return row.size(); }
};

/// col = floor((x-x_lo)/cell_x), row = floor((y-y_lo)/cell_y); in-bounds
/// iff x, y, z all lie inside their half-open ranges. Gather weights are
/// bilinear in the cell-center coordinates (x-x_lo)/cell_x - 0.5 etc., so
/// a point at a cell center gathers purely from that cell.
GridIndexMap bev_index(const pointcloud::PointCloud& cloud, const BevSpec& spec);

/// col from azimuth atan2(y, x) mapped linearly from [-pi, pi) onto
/// [0, cols) with wraparound; row from elevation atan2(z, hypot(x, y))
/// mapped linearly from the elevation range (hi at row 0). Points at the
/// exact origin (x = y = 0) are flagged out-of-bounds.
GridIndexMap rv_index(const pointcloud::PointCloud& cloud, const RvSpec& spec);

enum class Reduce { kMax, kMean };

/// C x rows x cols grid with per-cell occupancy.
struct GridTensor {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<float> data;           // [c*rows*cols + r*cols + col]
  std::vector<std::uint8_t> occupied;  // rows*cols

  float at(int c, int r, int col) const {
    return data[static_cast<std::size_t>(c) * rows * cols +
                static_cast<std::size_t>(r) * cols + col];
  }
};

/// Reduces in-bounds point features into their nearest cells. Empty cells
/// are zero with occupancy false; mean divides by exact counts. Results
/// are identical for any thread count: each cell is reduced over its
/// points in ascending point order regardless of partitioning.
GridTensor scatter(const MatrixXfR& features, const GridIndexMap& map,
                   Reduce reduce, int threads = 1);

/// Bilinear grid-to-point gather with the map's stored weights;
/// out-of-bounds points receive zero vectors.
MatrixXfR gather(const GridTensor& grid, const GridIndexMap& map,
                 int threads = 1);

}  // namespace fuselab::grids
