#pragma once

#include <cstdint>
#include <vector>

#include "semocc/geometry.hpp"
#include "semocc/tensor.hpp"

namespace semocc {

// Per-class loss weights w_c = 1 / ln(1.02 + f_c) from class frequencies
// f_c (fractions of the supervised elements), normalized to mean 1.
std::vector<double> class_frequency_weights(const std::vector<int64_t>& class_counts);

// Weighted cross-entropy over class-first logits (M, ...) against integer
// labels; elements with the ignore label or a zero mask entry are excluded.
// Returns sum(w_y * nll) / sum(w_y); zero when nothing is supervised.
Tensor weighted_cross_entropy(const Tensor& logits, const std::vector<uint16_t>& labels,
                              const std::vector<double>& class_weights,
                              const std::vector<uint8_t>* mask = nullptr,
                              uint16_t ignore = kIgnoreLabel);

// Class-wise soft-Dice loss over masked elements: 1 - mean_c dice_c with
// dice_c = (2*sum(p_c*g_c) + eps) / (sum(p_c) + sum(g_c) + eps). Classes
// absent from both prediction mass and labels contribute dice 1.
Tensor soft_dice(const Tensor& logits, const std::vector<uint16_t>& labels,
                 const std::vector<uint8_t>* mask = nullptr,
                 uint16_t ignore = kIgnoreLabel, double eps = 1e-6);

// Occupancy loss: weighted cross-entropy plus soft-Dice over the mask.
Tensor occupancy_loss(const Tensor& logits, const std::vector<uint16_t>& labels,
                      const std::vector<double>& class_weights,
                      const std::vector<uint8_t>* mask = nullptr,
                      uint16_t ignore = kIgnoreLabel);

// Binary geometry loss: weighted cross-entropy of 2-channel logits.
Tensor geometry_loss(const Tensor& logits, const std::vector<uint16_t>& labels,
                     const std::vector<double>& class_weights,
                     const std::vector<uint8_t>* mask = nullptr,
                     uint16_t ignore = kIgnoreLabel);

// Fused-prediction loss: occupancy loss on the voxel prediction plus
// cross-entropy of the projected segmentation against the pseudo labels.
// On frames without voxel annotations the first term vanishes through the
// ignore labels.
Tensor fusion_loss(const Tensor& voxel_logits, const LabelGrid& voxel_labels,
                   const Tensor& projected_logits, const LabelMap& pseudo_labels,
                   const std::vector<double>& voxel_weights,
                   const std::vector<double>& pixel_weights);

}  // namespace semocc
