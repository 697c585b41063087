#pragma once

#include <map>
#include <optional>
#include <vector>

#include "semocc/augment.hpp"
#include "semocc/formats.hpp"
#include "semocc/geometry.hpp"
#include "semocc/nn.hpp"

namespace semocc {

// Mean-reduces a (C,X,Y,Z) grid along one spatial axis: 'x' keeps (C,Y,Z),
// 'y' keeps (C,X,Z), 'z' keeps (C,X,Y).
Tensor reduce_grid_to_plane(const Tensor& grid, char axis);

// Collapses a stack of per-frame grids (same shape) into one grid with a
// learned full-width 1D convolution over the frame axis: a joint
// frame-and-channel mix. Kernel shape (C, C, N).
struct FrameFuser {
  Tensor kernel;
  FrameFuser() = default;
  FrameFuser(ParamRegistry& reg, const std::string& name, int channels, int frames, Rng& rng);
  Tensor fuse(const std::vector<Tensor>& grids) const;
};

// Single-head scaled dot-product attention along one plane axis with a
// residual connection: out = plane + O(softmax(Q K^T / sqrt(C)) V). A
// zero-initialized output projection makes this the exact identity.
struct AxisAttention {
  Tensor wq, wk, wv, wo;
  AxisAttention() = default;
  AxisAttention(ParamRegistry& reg, const std::string& name, int channels, Rng& rng);
  // plane (C, A, B); axis_of_rows = 1 attends along A (one sequence per B
  // column), axis_of_rows = 2 attends along B
  Tensor apply(const Tensor& plane, int axis_of_rows) const;
};

// Per-channel products of the axis-aligned planes, summed:
// out[c,x,y,z] = xz[c,x,z]*yz_z[c,y,z] + xy[c,x,y]*yz_y[c,y,z].
Tensor cross_plane_synergy(const Tensor& f_xz, const Tensor& f_yzz, const Tensor& f_xy,
                           const Tensor& f_yzy);

struct GeometricConfig {
  int channels = 8;
  int frames = 1;
};

// Geometry branch: camera features lifted into the grid and LiDAR features
// voxelized into it; each modality is reduced onto its reliable planes and
// recombined by cross-plane products into a geometric feature grid with a
// binary occupancy head.
class GeometryNet {
 public:
  GeometryNet(const GeometricConfig& cfg, const GridSpec& grid, const CameraCalibration& calib,
              Rng& rng);

  struct Output {
    Tensor feature_grid;  // (C, X, Y, Z)
    Tensor logits;        // (2, X, Y, Z)
  };
  // Single-frame forward; multi-frame inputs pass through the frame fusers.
  Output forward(const std::vector<TrainSample>& frames, uint64_t voxel_seed,
                 int voxel_sample_count = kMaxPointsPerVoxel) const;

  ParamRegistry& params() { return reg_; }
  const GridSpec& grid() const { return grid_; }

 private:
  GeometricConfig cfg_;
  GridSpec grid_;
  CameraCalibration calib_;
  ParamRegistry reg_;
  Conv2dLayer img_enc1_, img_enc2_;
  Conv3dLayer lidar_enc_;
  FrameFuser img_frames_, lidar_frames_;
  Conv3dLayer img_down_, lidar_down_;
  Conv2dLayer plane_xz_, plane_xy_, plane_yz_;
  AxisAttention attn_y_, attn_z_;
  Conv3dLayer post_up_;
  LinearLayer head_;
};

// Teacher predictions thresholded by softmax confidence. Kept voxels carry
// the argmax class; dropped voxels carry the ignore label.
struct FilteredPrediction {
  LabelGrid labels;  // 0/1 or ignore
  KeepMask keep;
};
FilteredPrediction confidence_filter(const Tensor& logits, double tau);

// One supervision frame of the merged stream: ground truth where annotated,
// filtered teacher predictions elsewhere.
struct SupervisionFrame {
  int frame_id = 0;
  bool annotated = false;
  LabelGrid labels;
  std::optional<KeepMask> keep;  // present on pseudo-labeled frames
};

std::vector<SupervisionFrame> merge_supervision(
    const std::map<int, LabelGrid>& annotated,
    const std::map<int, FilteredPrediction>& pseudo);

}  // namespace semocc
