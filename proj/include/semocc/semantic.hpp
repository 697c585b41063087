#pragma once

#include <vector>

#include "semocc/geometry.hpp"
#include "semocc/losses.hpp"
#include "semocc/nn.hpp"
#include "semocc/taxonomy.hpp"

namespace semocc {

struct SemanticConfig {
  int image_h = 64, image_w = 64;
  int num_classes = 12;
  // encoder widths at strides 1, 2, 4, 8; the stride-8 level is the feature map
  int c0 = 8, c1 = 12, c2 = 16, c3 = 16;
  int c3d = 16;  // 3D extractor width
};

// Image-side extractor: stride-2 conv encoder down to stride 8 plus a mirror
// decoder with skip connections; the bottleneck is the semantic feature map,
// the decoder head emits per-pixel class logits at full resolution.
class SemanticNet2d {
 public:
  SemanticNet2d(const SemanticConfig& cfg, Rng& rng);

  struct Output {
    Tensor features;  // (c3, h/8, w/8)
    Tensor logits;    // (num_classes, h, w)
  };
  Output forward(const Tensor& image) const;  // image (3,h,w)

  ParamRegistry& params() { return reg_; }
  const SemanticConfig& config() const { return cfg_; }
  void zero_head();  // for diagnostics: uniform logits

 private:
  SemanticConfig cfg_;
  ParamRegistry reg_;
  Conv2dLayer stem_, down1_, down2_, down3_;
  Conv2dLayer up3_, up2_, up1_;
  Conv2dLayer head_;
};

// LiDAR-side extractor over the mean-pooled voxel features: two dense 3D
// conv layers and a per-voxel classification head.
class SemanticNet3d {
 public:
  SemanticNet3d(const SemanticConfig& cfg, Rng& rng);

  struct Output {
    Tensor features;  // (c3d, X, Y, Z)
    Tensor logits;    // (num_classes, X, Y, Z)
  };
  Output forward(const Tensor& dense_voxels) const;  // (7, X, Y, Z)

  ParamRegistry& params() { return reg_; }
  void zero_bias_init();  // zero all conv biases (receptive-field probes)

 private:
  SemanticConfig cfg_;
  ParamRegistry reg_;
  Conv3dLayer conv1_, conv2_;
  LinearLayer head_;
};

// Pixel cross-entropy on the 2D prediction plus occupancy loss on the 3D
// prediction restricted to voxels holding more than one point.
Tensor semantic_loss(const Tensor& logits_2d, const LabelMap& pseudo_2d,
                     const Tensor& logits_3d, const LabelGrid& lifted_3d,
                     const std::vector<int>& point_counts,
                     const std::vector<double>& pixel_weights,
                     const std::vector<double>& voxel_weights);

// Per-voxel point counts aligned with the grid flat order.
std::vector<int> point_count_grid(const SparseVoxelSet& vox, const GridSpec& grid);

}  // namespace semocc
