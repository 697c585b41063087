#include "semocc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "semocc/rng.hpp"

namespace semocc {

void CameraCalibration::validate() const {
  if (image_h <= 0 || image_w <= 0)
    throw std::invalid_argument("calibration: image size must be positive");
  if (K[0][0] <= 0.0 || K[1][1] <= 0.0)
    throw std::invalid_argument("calibration: focal lengths must be positive");
  if (K[1][0] != 0.0 || K[2][0] != 0.0 || K[2][1] != 0.0 || K[2][2] != 1.0)
    throw std::invalid_argument("calibration: K must be upper-triangular with K[2][2] = 1");
  // rotation block orthonormality within 1e-9
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += T[a][k] * T[b][k];
      double want = a == b ? 1.0 : 0.0;
      if (std::fabs(dot - want) > 1e-9)
        throw std::invalid_argument("calibration: rotation block is not orthonormal");
    }
}

SparseVoxelSet voxelize(const PointCloud& cloud, const GridSpec& grid, uint64_t seed,
                        int max_points) {
  if (grid.nx <= 0 || grid.ny <= 0 || grid.nz <= 0)
    throw std::invalid_argument("voxelize: grid dims must be positive");
  if (max_points <= 0 || max_points > kMaxPointsPerVoxel)
    throw std::invalid_argument("voxelize: max_points must be in [1," +
                                std::to_string(kMaxPointsPerVoxel) + "]");
  // bucket all in-bounds points; map keeps cell order deterministic
  std::map<int64_t, std::vector<int>> buckets;
  int64_t dropped = 0;
  for (size_t pi = 0; pi < cloud.points.size(); ++pi) {
    const auto& p = cloud.points[pi];
    int i = static_cast<int>(std::floor((p[0] - grid.origin[0]) / grid.voxel_size));
    int j = static_cast<int>(std::floor((p[1] - grid.origin[1]) / grid.voxel_size));
    int k = static_cast<int>(std::floor((p[2] - grid.origin[2]) / grid.voxel_size));
    if (i < 0 || i >= grid.nx || j < 0 || j >= grid.ny || k < 0 || k >= grid.nz) {
      ++dropped;
      continue;
    }
    buckets[grid.flat(i, j, k)].push_back(static_cast<int>(pi));
  }
  SparseVoxelSet out;
  out.dropped_points = dropped;
  out.voxels.reserve(buckets.size());
  for (auto& [flat, members] : buckets) {
    SparseVoxelSet::Voxel v;
    int k = static_cast<int>(flat % grid.nz);
    int j = static_cast<int>((flat / grid.nz) % grid.ny);
    int i = static_cast<int>(flat / (static_cast<int64_t>(grid.ny) * grid.nz));
    v.cell = {i, j, k};
    v.point_count = static_cast<int>(members.size());
    if (v.point_count > max_points) {
      // partial Fisher-Yates keyed on (seed, cell) so the choice is stable
      // under any voxel iteration order
      Rng rng(derive_seed(seed, static_cast<uint64_t>(flat)));
      for (int s = 0; s < max_points; ++s) {
        size_t pick = static_cast<size_t>(s) +
                      static_cast<size_t>(rng.below(static_cast<uint64_t>(members.size() - static_cast<size_t>(s))));
        std::swap(members[static_cast<size_t>(s)], members[pick]);
      }
      members.resize(static_cast<size_t>(max_points));
    }
    auto center = grid.center(i, j, k);
    v.rows.reserve(members.size());
    for (int pi : members) {
      const auto& p = cloud.points[static_cast<size_t>(pi)];
      v.rows.push_back({p[0], p[1], p[2], p[3], p[0] - center[0], p[1] - center[1],
                        p[2] - center[2]});
    }
    out.voxels.push_back(std::move(v));
  }
  return out;
}

Tensor densify(const SparseVoxelSet& vox, const GridSpec& grid) {
  Tensor t = Tensor::zeros({SparseVoxelSet::kFeatureDim, grid.nx, grid.ny, grid.nz});
  auto& d = t.data();
  const int64_t cells = grid.cell_count();
  for (const auto& v : vox.voxels) {
    if (v.rows.empty()) continue;
    int64_t flat = grid.flat(v.cell[0], v.cell[1], v.cell[2]);
    for (int c = 0; c < SparseVoxelSet::kFeatureDim; ++c) {
      double s = 0.0;
      for (const auto& row : v.rows) s += row[static_cast<size_t>(c)];
      d[static_cast<size_t>(c * cells + flat)] = s / static_cast<double>(v.rows.size());
    }
  }
  return t;
}

Projection project_point(const CameraCalibration& calib, const std::array<double, 3>& p) {
  double cam[3];
  for (int r = 0; r < 3; ++r)
    cam[r] = calib.T[r][0] * p[0] + calib.T[r][1] * p[1] + calib.T[r][2] * p[2] + calib.T[r][3];
  Projection out;
  out.depth = cam[2];
  if (cam[2] <= 0.0) return out;
  double px = calib.K[0][0] * cam[0] + calib.K[0][1] * cam[1] + calib.K[0][2] * cam[2];
  double py = calib.K[1][1] * cam[1] + calib.K[1][2] * cam[2];
  out.u = px / cam[2];
  out.v = py / cam[2];
  out.valid = out.u >= 0.0 && out.u < static_cast<double>(calib.image_w) && out.v >= 0.0 &&
              out.v < static_cast<double>(calib.image_h);
  return out;
}

std::vector<Projection> project_voxel_centers(const GridSpec& grid,
                                              const CameraCalibration& calib) {
  calib.validate();
  std::vector<Projection> out(static_cast<size_t>(grid.cell_count()));
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.ny; ++j)
      for (int k = 0; k < grid.nz; ++k)
        out[static_cast<size_t>(grid.flat(i, j, k))] = project_point(calib, grid.center(i, j, k));
  return out;
}

LabelGrid lift_label_map(const LabelMap& seg, const GridSpec& grid,
                         const CameraCalibration& calib) {
  if (seg.h != calib.image_h || seg.w != calib.image_w)
    throw std::invalid_argument("lift_label_map: map size does not match calibration image size");
  auto proj = project_voxel_centers(grid, calib);
  LabelGrid out = make_label_grid(grid.nx, grid.ny, grid.nz, kIgnoreLabel);
  for (int64_t f = 0; f < grid.cell_count(); ++f) {
    const auto& p = proj[static_cast<size_t>(f)];
    if (!p.valid) continue;
    int col = static_cast<int>(std::floor(p.u));
    int row = static_cast<int>(std::floor(p.v));
    out.labels[static_cast<size_t>(f)] = seg.at(row, col);
  }
  return out;
}

Tensor lift_feature_map(const Tensor& feature_map, const GridSpec& grid,
                        const CameraCalibration& calib) {
  if (feature_map.rank() != 3)
    throw std::invalid_argument("lift_feature_map: expected (C,h,w), got " +
                                shape_str(feature_map.shape()));
  const int C = feature_map.dim(0), hf = feature_map.dim(1), wf = feature_map.dim(2);
  auto proj = project_voxel_centers(grid, calib);
  const int64_t cells = grid.cell_count();
  // gather valid voxels' feature pixels, then scatter into the grid; both
  // steps carry gradient back to the map
  std::vector<int64_t> gather_idx, scatter_idx;
  int64_t nvalid = 0;
  for (int64_t f = 0; f < cells; ++f)
    if (proj[static_cast<size_t>(f)].valid) ++nvalid;
  gather_idx.reserve(static_cast<size_t>(nvalid * C));
  scatter_idx.reserve(static_cast<size_t>(nvalid * C));
  const double su = static_cast<double>(wf) / static_cast<double>(calib.image_w);
  const double sv = static_cast<double>(hf) / static_cast<double>(calib.image_h);
  for (int64_t f = 0; f < cells; ++f) {
    const auto& p = proj[static_cast<size_t>(f)];
    if (!p.valid) continue;
    int col = std::min(static_cast<int>(std::floor(p.u * su)), wf - 1);
    int row = std::min(static_cast<int>(std::floor(p.v * sv)), hf - 1);
    for (int c = 0; c < C; ++c) {
      gather_idx.push_back((static_cast<int64_t>(c) * hf + row) * wf + col);
      scatter_idx.push_back(c * cells + f);
    }
  }
  if (gather_idx.empty()) return Tensor::zeros({C, grid.nx, grid.ny, grid.nz});
  Tensor picked = gather(feature_map, gather_idx, {static_cast<int>(gather_idx.size())});
  Tensor flat = scatter_add(picked, scatter_idx, {static_cast<int>(C * cells)});
  return reshape(flat, {C, grid.nx, grid.ny, grid.nz});
}

}  // namespace semocc
