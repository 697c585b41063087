#pragma once

#include <string>
#include <vector>

#include "semocc/geometry.hpp"
#include "semocc/hilbert.hpp"
#include "semocc/nn.hpp"

namespace semocc {

// One dual state-space block: two branches (semantic, geometric) add learned
// per-cell positional embeddings, exchange their leading floor(rho*C)
// channels, run a gated linear scan over the Hilbert-serialized cells, and
// add the (zero-initialized) projected scan output back onto the inputs.
class DualMambaBlock {
 public:
  DualMambaBlock(ParamRegistry& reg, const std::string& name, int channels,
                 std::array<int, 3> dims, double rho, Rng& rng);

  std::pair<Tensor, Tensor> forward(const Tensor& sem, const Tensor& geo,
                                    const HilbertOrder& order) const;

  int exchanged_channels() const { return exchange_; }

 private:
  Tensor branch_scan(const Tensor& grid, const HilbertOrder& order, bool semantic) const;

  int channels_ = 0;
  int exchange_ = 0;
  std::array<int, 3> dims_{};
  Tensor pos_sem_, pos_geo_;
  LinearLayer gate_a_sem_, gate_b_sem_, gate_c_sem_, out_sem_;
  LinearLayer gate_a_geo_, gate_b_geo_, gate_c_geo_, out_geo_;
};

struct FusionConfig {
  int channels = 8;
  int num_classes = 12;
  double rho = 0.5;
};

// U-shaped dual-branch fusion: four stride-2 downsampling stages and four
// upsampling stages, one dual block per stage per direction, with skip
// connections across the U. Inputs are zero-padded up to multiples of 16 per
// dim and the output is cropped back, so the fused grid keeps the input
// spatial dims. The final mix concatenates both branches.
class FusionStack {
 public:
  FusionStack(ParamRegistry& reg, const FusionConfig& cfg, std::array<int, 3> grid_dims,
              Rng& rng);

  Tensor forward(const Tensor& sem_grid, const Tensor& geo_grid) const;

  std::array<int, 3> padded_dims() const { return padded_; }

 private:
  FusionConfig cfg_;
  std::array<int, 3> dims_{}, padded_{};
  std::vector<HilbertOrder> orders_;          // one per stage resolution
  std::vector<DualMambaBlock> down_blocks_, up_blocks_;
  std::vector<Conv3dLayer> down_sem_, down_geo_, up_sem_, up_geo_;
  LinearLayer mix_;
};

// Voxel-to-pixel projection target built once per grid/calibration pair.
struct ScatterProjector {
  int out_h = 0, out_w = 0;
  std::vector<int64_t> pixel_of_voxel;  // flat pixel index, -1 when invalid
  std::vector<double> depth;            // camera-frame depth per voxel

  static ScatterProjector build(const GridSpec& grid, const CameraCalibration& calib);
};

enum class ProjectionMode { kPlain, kDistanceWeighted };

// Sums the features of every valid voxel into its pixel (plain) or scales
// each contribution by 1/(1+depth) (distance weighted). Pixels with no hits
// stay zero; gradients distribute back to the contributing voxels.
Tensor scatter_project(const Tensor& grid, const ScatterProjector& projector,
                       ProjectionMode mode);

// Full fusion module: combines the semantic grids (lifted image features
// concatenated with the LiDAR semantic features), runs the dual-branch U,
// projects the fused grid, and emits the voxel and projected class logits.
// sem_channels is the concatenated semantic channel count.
class FusionModel {
 public:
  FusionModel(const FusionConfig& cfg, std::array<int, 3> grid_dims, int sem_channels,
              int geo_channels, Rng& rng);

  struct Output {
    Tensor fused_grid;       // (C, X, Y, Z)
    Tensor voxel_logits;     // (M, X, Y, Z)
    Tensor projected_logits; // (M, h, w)
  };
  Output forward(const Tensor& lifted_image_feats, const Tensor& lidar_sem_feats,
                 const Tensor& geo_grid, const ScatterProjector& projector,
                 ProjectionMode mode) const;

  ParamRegistry& params() { return reg_; }
  FusionStack& stack() { return stack_; }

 private:
  FusionConfig cfg_;
  ParamRegistry reg_;
  LinearLayer sem_combine_;
  FusionStack stack_;
  LinearLayer head_voxel_, head_pixel_;
  LinearLayer geo_adapt_;
};

}  // namespace semocc
