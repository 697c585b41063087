#include "semocc/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace semocc {

namespace {

int64_t spatial_size(const Tensor& logits) {
  int64_t s = 1;
  for (int i = 1; i < logits.rank(); ++i) s *= logits.dim(i);
  return s;
}

bool supervised(const std::vector<uint16_t>& labels, const std::vector<uint8_t>* mask,
                uint16_t ignore, size_t i) {
  if (labels[i] == ignore) return false;
  if (mask && (*mask)[i] == 0) return false;
  return true;
}

}  // namespace

std::vector<double> class_frequency_weights(const std::vector<int64_t>& class_counts) {
  const size_t m = class_counts.size();
  int64_t total = 0;
  for (int64_t c : class_counts) total += c;
  std::vector<double> w(m);
  for (size_t c = 0; c < m; ++c) {
    double f = total > 0 ? static_cast<double>(class_counts[c]) / static_cast<double>(total) : 0.0;
    w[c] = 1.0 / std::log(1.02 + f);
  }
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(m);
  for (double& v : w) v /= mean;
  return w;
}

Tensor weighted_cross_entropy(const Tensor& logits, const std::vector<uint16_t>& labels,
                              const std::vector<double>& class_weights,
                              const std::vector<uint8_t>* mask, uint16_t ignore) {
  const int m = logits.dim(0);
  const int64_t n = spatial_size(logits);
  if (static_cast<int64_t>(labels.size()) != n)
    throw std::invalid_argument("weighted_cross_entropy: label count " +
                                std::to_string(labels.size()) + " does not match logits " +
                                shape_str(logits.shape()));
  if (static_cast<int>(class_weights.size()) != m)
    throw std::invalid_argument("weighted_cross_entropy: weight count does not match classes");
  std::vector<int64_t> idx;
  std::vector<double> wts;
  double wsum = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    if (!supervised(labels, mask, ignore, static_cast<size_t>(i))) continue;
    uint16_t y = labels[static_cast<size_t>(i)];
    if (y >= m)
      throw std::invalid_argument("weighted_cross_entropy: label " + std::to_string(y) +
                                  " out of range for " + std::to_string(m) + " classes");
    idx.push_back(static_cast<int64_t>(y) * n + i);
    wts.push_back(class_weights[y]);
    wsum += class_weights[y];
  }
  if (idx.empty()) return Tensor::zeros({1});
  Tensor flat = reshape(logits, {m, static_cast<int>(n)});
  Tensor ls = log_softmax_axis(flat, 0);
  Tensor picked = gather(ls, idx, {static_cast<int>(idx.size())});
  for (double& v : wts) v /= wsum;
  const int supervised_count = static_cast<int>(wts.size());
  Tensor w = Tensor::from_data({supervised_count}, std::move(wts));
  return scale(sum_all(mul(picked, w)), -1.0);
}

Tensor soft_dice(const Tensor& logits, const std::vector<uint16_t>& labels,
                 const std::vector<uint8_t>* mask, uint16_t ignore, double eps) {
  const int m = logits.dim(0);
  const int64_t n = spatial_size(logits);
  if (static_cast<int64_t>(labels.size()) != n)
    throw std::invalid_argument("soft_dice: label count does not match logits");
  // restrict to supervised elements
  std::vector<int64_t> sup;
  for (int64_t i = 0; i < n; ++i)
    if (supervised(labels, mask, ignore, static_cast<size_t>(i))) sup.push_back(i);
  if (sup.empty()) return Tensor::zeros({1});
  Tensor flat = reshape(logits, {m, static_cast<int>(n)});
  Tensor probs = softmax_axis(flat, 0);
  // gather the supervised columns for every class
  std::vector<int64_t> idx;
  idx.reserve(static_cast<size_t>(m) * sup.size());
  for (int c = 0; c < m; ++c)
    for (int64_t i : sup) idx.push_back(static_cast<int64_t>(c) * n + i);
  Tensor p = gather(probs, idx, {m, static_cast<int>(sup.size())});
  // one-hot ground truth over the supervised columns (constant)
  Tensor onehot = Tensor::zeros({m, static_cast<int>(sup.size())});
  for (size_t k = 0; k < sup.size(); ++k)
    onehot.data()[static_cast<size_t>(labels[static_cast<size_t>(sup[k])]) * sup.size() + k] = 1.0;
  Tensor inter = sum_axis(mul(p, onehot), 1);             // (m)
  Tensor psum = sum_axis(p, 1);
  Tensor gsum = sum_axis(onehot, 1);
  Tensor dice = divide(affine(inter, 2.0, eps), affine(add(psum, gsum), 1.0, eps));
  Tensor mean_dice = scale(sum_all(dice), 1.0 / static_cast<double>(m));
  return affine(mean_dice, -1.0, 1.0);  // 1 - mean dice
}

Tensor occupancy_loss(const Tensor& logits, const std::vector<uint16_t>& labels,
                      const std::vector<double>& class_weights,
                      const std::vector<uint8_t>* mask, uint16_t ignore) {
  return add(weighted_cross_entropy(logits, labels, class_weights, mask, ignore),
             soft_dice(logits, labels, mask, ignore));
}

Tensor geometry_loss(const Tensor& logits, const std::vector<uint16_t>& labels,
                     const std::vector<double>& class_weights,
                     const std::vector<uint8_t>* mask, uint16_t ignore) {
  if (logits.dim(0) != 2)
    throw std::invalid_argument("geometry_loss: expected 2-channel logits, got " +
                                shape_str(logits.shape()));
  return weighted_cross_entropy(logits, labels, class_weights, mask, ignore);
}

Tensor fusion_loss(const Tensor& voxel_logits, const LabelGrid& voxel_labels,
                   const Tensor& projected_logits, const LabelMap& pseudo_labels,
                   const std::vector<double>& voxel_weights,
                   const std::vector<double>& pixel_weights) {
  Tensor occ = occupancy_loss(voxel_logits, voxel_labels.labels, voxel_weights);
  Tensor ce = weighted_cross_entropy(projected_logits, pseudo_labels.labels, pixel_weights);
  return add(occ, ce);
}

}  // namespace semocc
