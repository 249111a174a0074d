#include "fuselab/grids.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fuselab/errors.hpp"
#include "fuselab/threads.hpp"

namespace fuselab::grids {

namespace {

int clamp_cell(int v, int n) { return std::min(std::max(v, 0), n - 1); }

int wrap_cell(int v, int n) {
  int r = v % n;
  return r < 0 ? r + n : r;
}

struct GatherBase {
  int r0, c0;
  double fr, fc;  // fractional parts toward (r0+1, c0+1)
};

GatherBase gather_base(double row_cont, double col_cont) {
  const double gr = row_cont - 0.5;
  const double gc = col_cont - 0.5;
  GatherBase b;
  b.r0 = static_cast<int>(std::floor(gr));
  b.c0 = static_cast<int>(std::floor(gc));
  b.fr = gr - b.r0;
  b.fc = gc - b.c0;
  return b;
}

void store_neighbors(GridIndexMap& map, std::size_t i, const GatherBase& b,
                     bool wrap_cols) {
  const int rows = map.rows, cols = map.cols;
  const int r[2] = {clamp_cell(b.r0, rows), clamp_cell(b.r0 + 1, rows)};
  int c[2];
  if (wrap_cols) {
    c[0] = wrap_cell(b.c0, cols);
    c[1] = wrap_cell(b.c0 + 1, cols);
  } else {
    c[0] = clamp_cell(b.c0, cols);
    c[1] = clamp_cell(b.c0 + 1, cols);
  }
  map.nbr[i] = {r[0] * cols + c[0], r[0] * cols + c[1], r[1] * cols + c[0],
                r[1] * cols + c[1]};
  map.weight[i] = {(1.0 - b.fr) * (1.0 - b.fc), (1.0 - b.fr) * b.fc,
                   b.fr * (1.0 - b.fc), b.fr * b.fc};
}

GridIndexMap make_map(std::size_t n, int rows, int cols) {
  GridIndexMap map;
  map.rows = rows;
  map.cols = cols;
  map.row.assign(n, 0);
  map.col.assign(n, 0);
  map.in_bounds.assign(n, 0);
  map.nbr.assign(n, {0, 0, 0, 0});
  map.weight.assign(n, {0.0, 0.0, 0.0, 0.0});
  return map;
}

}  // namespace

void BevSpec::validate() const {
  if (!(x_lo < x_hi) || !(y_lo < y_hi) || !(z_lo < z_hi))
    throw ValidationError("BEV spec needs lo < hi per axis");
  if (cells_x < 1 || cells_y < 1)
    throw ValidationError("BEV spec needs positive cell counts");
}

BevSpec BevSpec::nuscenes() { return BevSpec{}; }

BevSpec BevSpec::semantic_kitti() {
  BevSpec spec;
  spec.x_lo = -75.2;
  spec.x_hi = 75.2;
  spec.y_lo = -75.2;
  spec.y_hi = 75.2;
  spec.z_lo = -4.0;
  spec.z_hi = 2.0;
  return spec;
}

void RvSpec::validate() const {
  if (rows < 1 || cols < 1)
    throw ValidationError("RV spec needs positive rows and cols");
  if (!(elev_lo < elev_hi))
    throw ValidationError("RV spec needs elevation lo < hi");
}

GridIndexMap bev_index(const pointcloud::PointCloud& cloud, const BevSpec& spec) {
  spec.validate();
  cloud.validate();
  const std::size_t n = static_cast<std::size_t>(cloud.n());
  GridIndexMap map = make_map(n, spec.cells_y, spec.cells_x);
  const double inv_cx = 1.0 / spec.cell_x();
  const double inv_cy = 1.0 / spec.cell_y();

  for (std::size_t i = 0; i < n; ++i) {
    const double x = cloud.xyz(0, i);
    const double y = cloud.xyz(1, i);
    const double z = cloud.xyz(2, i);
    const double col_cont = (x - spec.x_lo) * inv_cx;
    const double row_cont = (y - spec.y_lo) * inv_cy;
    const int col = static_cast<int>(std::floor(col_cont));
    const int row = static_cast<int>(std::floor(row_cont));
    const bool inside = x >= spec.x_lo && x < spec.x_hi && y >= spec.y_lo &&
                        y < spec.y_hi && z >= spec.z_lo && z < spec.z_hi &&
                        col >= 0 && col < spec.cells_x && row >= 0 &&
                        row < spec.cells_y;
    if (!inside) continue;
    map.row[i] = row;
    map.col[i] = col;
    map.in_bounds[i] = 1;
    store_neighbors(map, i, gather_base(row_cont, col_cont), false);
  }
  return map;
}

GridIndexMap rv_index(const pointcloud::PointCloud& cloud, const RvSpec& spec) {
  spec.validate();
  cloud.validate();
  const std::size_t n = static_cast<std::size_t>(cloud.n());
  GridIndexMap map = make_map(n, spec.rows, spec.cols);
  const double inv_elev_span = 1.0 / (spec.elev_hi - spec.elev_lo);

  for (std::size_t i = 0; i < n; ++i) {
    const double x = cloud.xyz(0, i);
    const double y = cloud.xyz(1, i);
    const double z = cloud.xyz(2, i);
    const double planar = std::hypot(x, y);
    if (planar == 0.0) continue;  // azimuth undefined at the origin
    const double azimuth = std::atan2(y, x);           // [-pi, pi]
    const double elev = std::atan2(z, planar);
    if (elev < spec.elev_lo || elev > spec.elev_hi) continue;

    const double col_cont = (azimuth + M_PI) / (2.0 * M_PI) * spec.cols;
    const double row_cont = (spec.elev_hi - elev) * inv_elev_span * spec.rows;
    const int col = wrap_cell(static_cast<int>(std::floor(col_cont)), spec.cols);
    // elev == elev_lo lands exactly on the bottom edge; keep it in the
    // last row.
    const int row = clamp_cell(static_cast<int>(std::floor(row_cont)), spec.rows);

    map.row[i] = row;
    map.col[i] = col;
    map.in_bounds[i] = 1;
    store_neighbors(map, i, gather_base(row_cont, col_cont), true);
  }
  return map;
}

GridTensor scatter(const MatrixXfR& features, const GridIndexMap& map,
                   Reduce reduce, int threads) {
  const std::size_t n = map.n();
  if (static_cast<std::size_t>(features.rows()) != n)
    throw ValidationError("scatter: feature rows do not match the index map");
  const int channels = static_cast<int>(features.cols());
  const std::size_t cells = static_cast<std::size_t>(map.rows) * map.cols;

  GridTensor grid;
  grid.channels = channels;
  grid.rows = map.rows;
  grid.cols = map.cols;
  grid.data.assign(static_cast<std::size_t>(channels) * cells, 0.0f);
  grid.occupied.assign(cells, 0);

  // Order-preserving bin of point indices per cell (counting sort), so the
  // per-cell reduction below sees points in ascending index order no matter
  // how the cell loop is partitioned across threads.
  std::vector<std::uint32_t> cell_count(cells + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (map.in_bounds[i])
      ++cell_count[static_cast<std::size_t>(map.row[i]) * map.cols + map.col[i] + 1];
  for (std::size_t c = 0; c < cells; ++c) cell_count[c + 1] += cell_count[c];
  std::vector<std::uint32_t> offsets(cell_count.begin(), cell_count.end() - 1);
  std::vector<std::uint32_t> binned(cell_count[cells]);
  for (std::size_t i = 0; i < n; ++i) {
    if (!map.in_bounds[i]) continue;
    const std::size_t cell =
        static_cast<std::size_t>(map.row[i]) * map.cols + map.col[i];
    binned[offsets[cell]++] = static_cast<std::uint32_t>(i);
  }

  const int t = resolve_threads(threads);
  parallel_chunks(static_cast<std::int64_t>(cells), t,
                  [&](std::int64_t lo, std::int64_t hi) {
    std::vector<double> mean_acc(reduce == Reduce::kMean ? channels : 0);
    for (std::int64_t cell = lo; cell < hi; ++cell) {
      const std::uint32_t begin = cell_count[cell];
      const std::uint32_t end = cell_count[cell + 1];
      if (begin == end) continue;
      grid.occupied[cell] = 1;
      if (reduce == Reduce::kMax) {
        for (int c = 0; c < channels; ++c) {
          float best = features(binned[begin], c);
          for (std::uint32_t k = begin + 1; k < end; ++k)
            best = std::max(best, features(binned[k], c));
          grid.data[static_cast<std::size_t>(c) * cells + cell] = best;
        }
      } else {
        std::fill(mean_acc.begin(), mean_acc.end(), 0.0);
        for (std::uint32_t k = begin; k < end; ++k)
          for (int c = 0; c < channels; ++c)
            mean_acc[c] += static_cast<double>(features(binned[k], c));
        const double inv = 1.0 / static_cast<double>(end - begin);
        for (int c = 0; c < channels; ++c)
          grid.data[static_cast<std::size_t>(c) * cells + cell] =
              static_cast<float>(mean_acc[c] * inv);
      }
    }
  });
  return grid;
}

MatrixXfR gather(const GridTensor& grid, const GridIndexMap& map, int threads) {
  if (grid.rows != map.rows || grid.cols != map.cols)
    throw ValidationError("gather: grid shape does not match the index map");
  const std::size_t n = map.n();
  const int channels = grid.channels;
  const std::size_t cells = static_cast<std::size_t>(grid.rows) * grid.cols;

  MatrixXfR out = MatrixXfR::Zero(static_cast<Eigen::Index>(n), channels);
  const int t = resolve_threads(threads);
  parallel_chunks(static_cast<std::int64_t>(n), t,
                  [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      if (!map.in_bounds[i]) continue;
      const auto& nbr = map.nbr[i];
      const auto& w = map.weight[i];
      for (int c = 0; c < channels; ++c) {
        const float* plane = grid.data.data() + static_cast<std::size_t>(c) * cells;
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += w[k] * plane[nbr[k]];
        out(i, c) = static_cast<float>(acc);
      }
    }
  });
  return out;
}

}  // namespace fuselab::grids
