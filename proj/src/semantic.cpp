#include "semocc/semantic.hpp"

#include <algorithm>
#include <stdexcept>

namespace semocc {

SemanticNet2d::SemanticNet2d(const SemanticConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.image_h % 8 != 0 || cfg.image_w % 8 != 0)
    throw std::invalid_argument("SemanticNet2d: image dims must be divisible by 8");
  stem_ = Conv2dLayer(reg_, "stem", 3, cfg.c0, 3, rng);
  down1_ = Conv2dLayer(reg_, "down1", cfg.c0, cfg.c1, 3, rng);
  down2_ = Conv2dLayer(reg_, "down2", cfg.c1, cfg.c2, 3, rng);
  down3_ = Conv2dLayer(reg_, "down3", cfg.c2, cfg.c3, 3, rng);
  up3_ = Conv2dLayer(reg_, "up3", cfg.c3, cfg.c2, 3, rng);
  up2_ = Conv2dLayer(reg_, "up2", cfg.c2, cfg.c1, 3, rng);
  up1_ = Conv2dLayer(reg_, "up1", cfg.c1, cfg.c0, 3, rng);
  head_ = Conv2dLayer(reg_, "head", cfg.c0, cfg.num_classes, 3, rng);
}

SemanticNet2d::Output SemanticNet2d::forward(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != cfg_.image_h ||
      image.dim(2) != cfg_.image_w)
    throw std::invalid_argument("SemanticNet2d: image shape " + shape_str(image.shape()) +
                                " does not match configured " + std::to_string(cfg_.image_h) +
                                "x" + std::to_string(cfg_.image_w));
  Tensor x0 = relu(stem_.forward(image, 1));
  Tensor x1 = relu(down1_.forward(x0, 2));
  Tensor x2 = relu(down2_.forward(x1, 2));
  Tensor x3 = relu(down3_.forward(x2, 2));  // stride-8 bottleneck
  Tensor d2 = relu(add(up3_.forward(upsample2x_2d(x3), 1), x2));
  Tensor d1 = relu(add(up2_.forward(upsample2x_2d(d2), 1), x1));
  Tensor d0 = relu(add(up1_.forward(upsample2x_2d(d1), 1), x0));
  Tensor logits = head_.forward(d0, 1);
  return {x3, logits};
}

void SemanticNet2d::zero_head() {
  std::fill(head_.w.data().begin(), head_.w.data().end(), 0.0);
  std::fill(head_.b.data().begin(), head_.b.data().end(), 0.0);
}

SemanticNet3d::SemanticNet3d(const SemanticConfig& cfg, Rng& rng) : cfg_(cfg) {
  conv1_ = Conv3dLayer(reg_, "conv1", SparseVoxelSet::kFeatureDim, cfg.c3d, 3, rng);
  conv2_ = Conv3dLayer(reg_, "conv2", cfg.c3d, cfg.c3d, 3, rng);
  head_ = LinearLayer(reg_, "head", cfg.c3d, cfg.num_classes, rng);
}

SemanticNet3d::Output SemanticNet3d::forward(const Tensor& dense_voxels) const {
  if (dense_voxels.rank() != 4 || dense_voxels.dim(0) != SparseVoxelSet::kFeatureDim)
    throw std::invalid_argument("SemanticNet3d: expected (7,X,Y,Z) input, got " +
                                shape_str(dense_voxels.shape()));
  Tensor h1 = relu(conv1_.forward(dense_voxels, 1));
  Tensor feats = relu(conv2_.forward(h1, 1));
  Tensor logits = head_.forward_cellwise(feats);
  return {feats, logits};
}

void SemanticNet3d::zero_bias_init() {
  std::fill(conv1_.b.data().begin(), conv1_.b.data().end(), 0.0);
  std::fill(conv2_.b.data().begin(), conv2_.b.data().end(), 0.0);
  std::fill(head_.b.data().begin(), head_.b.data().end(), 0.0);
}

std::vector<int> point_count_grid(const SparseVoxelSet& vox, const GridSpec& grid) {
  std::vector<int> counts(static_cast<size_t>(grid.cell_count()), 0);
  for (const auto& v : vox.voxels)
    counts[static_cast<size_t>(grid.flat(v.cell[0], v.cell[1], v.cell[2]))] = v.point_count;
  return counts;
}

Tensor semantic_loss(const Tensor& logits_2d, const LabelMap& pseudo_2d,
                     const Tensor& logits_3d, const LabelGrid& lifted_3d,
                     const std::vector<int>& point_counts,
                     const std::vector<double>& pixel_weights,
                     const std::vector<double>& voxel_weights) {
  Tensor ce = weighted_cross_entropy(logits_2d, pseudo_2d.labels, pixel_weights);
  // occupancy term only where more than one point landed in the voxel
  std::vector<uint8_t> mask(point_counts.size());
  for (size_t i = 0; i < point_counts.size(); ++i) mask[i] = point_counts[i] > 1 ? 1 : 0;
  Tensor occ = occupancy_loss(logits_3d, lifted_3d.labels, voxel_weights, &mask);
  return add(ce, occ);
}

}  // namespace semocc
