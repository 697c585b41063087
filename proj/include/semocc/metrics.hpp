#pragma once

#include <cstdint>
#include <vector>

#include "semocc/geometry.hpp"

namespace semocc {

// Row = ground-truth class, column = predicted class; counts over elements
// whose ground truth is not the ignore label.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<int64_t> counts;  // num_classes * num_classes

  explicit ConfusionMatrix(int m)
      : num_classes(m), counts(static_cast<size_t>(m) * m, 0) {}
  int64_t at(int gt, int pred) const {
    return counts[static_cast<size_t>(gt) * num_classes + pred];
  }
  int64_t& at(int gt, int pred) {
    return counts[static_cast<size_t>(gt) * num_classes + pred];
  }
  void add(const std::vector<uint16_t>& pred, const std::vector<uint16_t>& gt,
           uint16_t ignore = kIgnoreLabel);
};

struct EvalResult {
  double iou = 0.0;    // binary occupied-vs-free, percent
  double miou = 0.0;   // mean over semantic classes present anywhere, percent
  std::vector<double> per_class;  // percent; quiet NaN for excluded classes
};

// IoU treats every class >= 1 as occupied (class 0 = free); mIoU averages
// per-class IoU over classes 1..M-1, excluding classes absent from both
// prediction and ground truth.
EvalResult evaluate_confusion(const ConfusionMatrix& cm);
EvalResult evaluate(const LabelGrid& pred, const LabelGrid& gt, int num_classes);

}  // namespace semocc
