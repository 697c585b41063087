#include "semocc/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace semocc {

void ConfusionMatrix::add(const std::vector<uint16_t>& pred, const std::vector<uint16_t>& gt,
                          uint16_t ignore) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("confusion: prediction and ground truth sizes differ");
  for (size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore) continue;
    if (gt[i] >= num_classes || pred[i] >= num_classes)
      throw std::invalid_argument("confusion: label out of range");
    ++at(gt[i], pred[i]);
  }
}

EvalResult evaluate_confusion(const ConfusionMatrix& cm) {
  const int m = cm.num_classes;
  EvalResult res;
  res.per_class.assign(static_cast<size_t>(m), std::numeric_limits<double>::quiet_NaN());

  // binary occupancy: classes >= 1 are occupied
  int64_t inter = 0, pred_occ = 0, gt_occ = 0;
  for (int g = 0; g < m; ++g)
    for (int p = 0; p < m; ++p) {
      int64_t c = cm.at(g, p);
      if (g >= 1) gt_occ += c;
      if (p >= 1) pred_occ += c;
      if (g >= 1 && p >= 1) inter += c;
    }
  int64_t uni = pred_occ + gt_occ - inter;
  res.iou = uni > 0 ? 100.0 * static_cast<double>(inter) / static_cast<double>(uni) : 0.0;

  double sum = 0.0;
  int present = 0;
  for (int c = 1; c < m; ++c) {
    int64_t tp = cm.at(c, c);
    int64_t fp = 0, fn = 0;
    for (int o = 0; o < m; ++o) {
      if (o != c) {
        fp += cm.at(o, c);
        fn += cm.at(c, o);
      }
    }
    if (tp + fp + fn == 0) continue;  // absent from both: excluded
    double iou = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    res.per_class[static_cast<size_t>(c)] = iou;
    sum += iou;
    ++present;
  }
  res.miou = present > 0 ? sum / static_cast<double>(present) : 0.0;
  return res;
}

EvalResult evaluate(const LabelGrid& pred, const LabelGrid& gt, int num_classes) {
  if (pred.nx != gt.nx || pred.ny != gt.ny || pred.nz != gt.nz)
    throw std::invalid_argument("evaluate: grid shapes differ");
  ConfusionMatrix cm(num_classes);
  cm.add(pred.labels, gt.labels);
  return evaluate_confusion(cm);
}

}  // namespace semocc
