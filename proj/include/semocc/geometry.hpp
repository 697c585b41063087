#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "semocc/tensor.hpp"

namespace semocc {

constexpr uint16_t kIgnoreLabel = 65535;

// Dense label containers. LabelGrid is (X,Y,Z) row-major, LabelMap is (h,w).
struct LabelGrid {
  int nx = 0, ny = 0, nz = 0;
  std::vector<uint16_t> labels;  // size nx*ny*nz

  int64_t size() const { return static_cast<int64_t>(nx) * ny * nz; }
  uint16_t at(int i, int j, int k) const {
    return labels[static_cast<size_t>((static_cast<int64_t>(i) * ny + j) * nz + k)];
  }
  uint16_t& at(int i, int j, int k) {
    return labels[static_cast<size_t>((static_cast<int64_t>(i) * ny + j) * nz + k)];
  }
};

struct LabelMap {
  int h = 0, w = 0;
  std::vector<uint16_t> labels;  // size h*w

  int64_t size() const { return static_cast<int64_t>(h) * w; }
  uint16_t at(int row, int col) const {
    return labels[static_cast<size_t>(static_cast<int64_t>(row) * w + col)];
  }
  uint16_t& at(int row, int col) {
    return labels[static_cast<size_t>(static_cast<int64_t>(row) * w + col)];
  }
};

inline LabelGrid make_label_grid(int nx, int ny, int nz, uint16_t fill = 0) {
  return LabelGrid{nx, ny, nz,
                   std::vector<uint16_t>(static_cast<size_t>(nx) * ny * nz, fill)};
}
inline LabelMap make_label_map(int h, int w, uint16_t fill = 0) {
  return LabelMap{h, w, std::vector<uint16_t>(static_cast<size_t>(h) * w, fill)};
}

// Axis-aligned voxel grid: cell (i,j,k) spans
// origin + (i,j,k)*voxel_size .. origin + (i+1,j+1,k+1)*voxel_size.
struct GridSpec {
  int nx = 32, ny = 32, nz = 8;
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  double voxel_size = 0.4;

  int64_t cell_count() const { return static_cast<int64_t>(nx) * ny * nz; }
  std::array<double, 3> center(int i, int j, int k) const {
    return {origin[0] + (i + 0.5) * voxel_size, origin[1] + (j + 0.5) * voxel_size,
            origin[2] + (k + 0.5) * voxel_size};
  }
  int64_t flat(int i, int j, int k) const {
    return (static_cast<int64_t>(i) * ny + j) * nz + k;
  }

  // 51.2m x 51.2m x 6.4m scene at 0.2m cells
  static GridSpec full_scale() { return GridSpec{256, 256, 32, {0.0, -25.6, -2.0}, 0.2}; }
  static GridSpec desk_default() { return GridSpec{32, 32, 8, {0.0, 0.0, 0.0}, 0.4}; }
};

// Pinhole camera: pixel = perspective division of K * (T * world), with T a
// 4x4 world-to-camera transform and K upper-triangular, K[2][2] = 1.
struct CameraCalibration {
  std::array<std::array<double, 3>, 3> K{};
  std::array<std::array<double, 4>, 4> T{};
  int image_h = 0, image_w = 0;

  void validate() const;  // throws on malformed K or non-orthonormal rotation
};

struct PointCloud {
  // rows of (x, y, z, intensity)
  std::vector<std::array<double, 4>> points;
};

// Occupied-voxel structure: per voxel the cell index, the full point count,
// and up to max_points sampled feature rows (x, y, z, intensity, dx, dy, dz)
// where d* is the offset from the voxel center.
struct SparseVoxelSet {
  static constexpr int kFeatureDim = 7;
  struct Voxel {
    std::array<int, 3> cell{};
    int point_count = 0;
    std::vector<std::array<double, kFeatureDim>> rows;
  };
  std::vector<Voxel> voxels;
  int64_t dropped_points = 0;  // out-of-bounds inputs
};

constexpr int kMaxPointsPerVoxel = 35;

// Assigns points to voxels by floor((p - origin)/voxel_size); out-of-bounds
// points are dropped and counted. Voxels holding more than max_points points
// are downsampled uniformly at random; the sampling stream is derived from
// (seed, cell index) so the result does not depend on voxel iteration order.
SparseVoxelSet voxelize(const PointCloud& cloud, const GridSpec& grid, uint64_t seed,
                        int max_points = kMaxPointsPerVoxel);

// Mean-pools sampled rows into a dense (7, X, Y, Z) tensor; empty voxels
// stay zero.
Tensor densify(const SparseVoxelSet& vox, const GridSpec& grid);

struct Projection {
  bool valid = false;
  double u = 0.0, v = 0.0;  // continuous pixel coords, u along width
  double depth = 0.0;       // camera-frame z
};

// Projects one world point.
Projection project_point(const CameraCalibration& calib, const std::array<double, 3>& p);

// Projects every voxel center; invalid when camera-frame depth <= 0 or the
// pixel falls outside [0,w) x [0,h). Order matches GridSpec::flat.
std::vector<Projection> project_voxel_centers(const GridSpec& grid,
                                              const CameraCalibration& calib);

// Lifts a 2D label map into the grid: valid voxels take the containing-pixel
// label (pixel (floor(v), floor(u))), invalid voxels take kIgnoreLabel.
LabelGrid lift_label_map(const LabelMap& seg, const GridSpec& grid,
                         const CameraCalibration& calib);

// Lifts a (C, hf, wf) feature map into a (C, X, Y, Z) grid with the same
// nearest-pixel kernel, scaled when the map resolution differs from the
// calibrated image. Invalid voxels are zero. Gradients flow back to the map.
Tensor lift_feature_map(const Tensor& feature_map, const GridSpec& grid,
                        const CameraCalibration& calib);

}  // namespace semocc
