#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "semocc/losses.hpp"
#include "semocc/metrics.hpp"
#include "semocc/training.hpp"

using namespace semocc;

TEST_CASE("class frequency weights") {
  auto w = class_frequency_weights({100, 100, 100, 100});
  for (double v : w) CHECK(v == doctest::Approx(1.0));
  auto w2 = class_frequency_weights({1000, 10, 0});
  CHECK(w2[1] > w2[0]);  // rare class weighted up
  CHECK(w2[2] > w2[1]);
  double mean = (w2[0] + w2[1] + w2[2]) / 3.0;
  CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weighted cross entropy hand case") {
  // two pixels, three classes, one ignored pixel
  Tensor logits = Tensor::from_data({3, 3}, {2.0, 0.5, 0.0,
                                             0.0, 1.5, 0.0,
                                             -1.0, 0.2, 0.0}, true);
  std::vector<uint16_t> labels = {0, 1, kIgnoreLabel};
  std::vector<double> w = {1.0, 2.0, 1.0};
  Tensor loss = weighted_cross_entropy(logits, labels, w);

  // independent closed form
  auto nll = [&](int pix, int target) {
    double z = 0.0;
    for (int c = 0; c < 3; ++c) z += std::exp(logits.data()[static_cast<size_t>(c) * 3 + pix]);
    return -(logits.data()[static_cast<size_t>(target) * 3 + pix] - std::log(z));
  };
  double want = (1.0 * nll(0, 0) + 2.0 * nll(1, 1)) / 3.0;
  CHECK(loss.item() == doctest::Approx(want).epsilon(1e-12));

  // gradient flows
  loss.backward();
  CHECK(logits.has_grad());
}

TEST_CASE("losses are zero on saturated correct predictions and empty masks") {
  std::vector<uint16_t> labels = {0, 2, 1, 1};
  Tensor logits = Tensor::zeros({3, 4});
  for (int i = 0; i < 4; ++i)
    logits.data()[static_cast<size_t>(labels[static_cast<size_t>(i)]) * 4 + i] = 60.0;
  std::vector<double> w = {1.0, 1.0, 1.0};

  CHECK(weighted_cross_entropy(logits, labels, w).item() <= 1e-9);
  CHECK(soft_dice(logits, labels).item() <= 1e-9);
  CHECK(occupancy_loss(logits, labels, w).item() <= 1e-9);

  std::vector<uint8_t> none(4, 0);
  CHECK(occupancy_loss(logits, labels, w, &none).item() == 0.0);
  std::vector<uint16_t> all_ignore(4, kIgnoreLabel);
  CHECK(occupancy_loss(logits, all_ignore, w).item() == 0.0);
}

TEST_CASE("losses are non-negative on random inputs") {
  Rng rng(31);
  std::vector<double> w = {1.0, 1.3, 0.7, 1.0};
  for (int rep = 0; rep < 40; ++rep) {
    Tensor logits = Tensor::zeros({4, 10});
    for (auto& v : logits.data()) v = rng.uniform(-3, 3);
    std::vector<uint16_t> labels(10);
    for (auto& l : labels) l = static_cast<uint16_t>(rng.below(4));
    labels[rng.below(10)] = kIgnoreLabel;
    CHECK(weighted_cross_entropy(logits, labels, w).item() >= 0.0);
    CHECK(soft_dice(logits, labels).item() >= -1e-12);
    CHECK(occupancy_loss(logits, labels, w).item() >= 0.0);
  }
}

TEST_CASE("occupancy loss hand case matches closed form") {
  // 2 voxels, 2 classes
  Tensor logits = Tensor::from_data({2, 2}, {1.0, -0.5, 0.0, 0.5}, true);
  std::vector<uint16_t> labels = {0, 1};
  std::vector<double> w = {1.0, 1.0};
  double l = occupancy_loss(logits, labels, w).item();

  auto p = [&](int c, int v) {
    double a = logits.data()[static_cast<size_t>(v)];
    double b = logits.data()[static_cast<size_t>(2 + v)];
    double m = std::max(a, b);
    double za = std::exp(a - m), zb = std::exp(b - m);
    return (c == 0 ? za : zb) / (za + zb);
  };
  double ce = (-std::log(p(0, 0)) - std::log(p(1, 1))) / 2.0;
  double eps = 1e-6;
  double dice0 = (2 * p(0, 0) + eps) / (p(0, 0) + p(0, 1) + 1.0 + eps);
  double dice1 = (2 * p(1, 1) + eps) / (p(1, 0) + p(1, 1) + 1.0 + eps);
  double want = ce + 1.0 - 0.5 * (dice0 + dice1);
  CHECK(l == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("composite losses pass finite difference checks") {
  Rng rng(77);
  std::vector<double> w3 = {1.0, 1.2, 0.8};
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<uint16_t> labels(8);
    for (auto& l : labels) l = static_cast<uint16_t>(rng.below(3));
    labels[0] = kIgnoreLabel;
    std::vector<uint8_t> mask(8, 1);
    mask[3] = 0;
    auto f = [&](const std::vector<Tensor>& in) {
      return occupancy_loss(in[0], labels, w3, &mask);
    };
    Tensor logits = Tensor::zeros({3, 8});
    for (auto& v : logits.data()) v = rng.uniform(-1, 1);
    CHECK(semocc::testing::finite_difference_check(f, {logits}) <= 1e-4);
  }
}

TEST_CASE("geometry loss") {
  Tensor logits = Tensor::from_data({2, 3}, {5.0, -5.0, 0.0, -5.0, 5.0, 0.0}, true);
  std::vector<uint16_t> labels = {0, 1, kIgnoreLabel};
  std::vector<double> w = {1.0, 1.0};
  CHECK(geometry_loss(logits, labels, w).item() <= 1e-2);
  Tensor bad = Tensor::zeros({3, 3});
  CHECK_THROWS_AS(geometry_loss(bad, labels, {1.0, 1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("fusion loss splits into its terms") {
  Rng rng(12);
  Tensor y3d = Tensor::zeros({3, 2, 2, 1});
  for (auto& v : y3d.data()) v = rng.uniform(-1, 1);
  Tensor y2d = Tensor::zeros({3, 2, 2});
  for (auto& v : y2d.data()) v = rng.uniform(-1, 1);
  LabelGrid gt = make_label_grid(2, 2, 1);
  gt.labels = {0, 1, 2, 1};
  LabelMap px = make_label_map(2, 2);
  px.labels = {2, 0, 1, 0};
  std::vector<double> w = {1.0, 1.0, 1.0};

  double full = fusion_loss(y3d, gt, y2d, px, w, w).item();
  double occ = occupancy_loss(y3d, gt.labels, w).item();
  double ce = weighted_cross_entropy(y2d, px.labels, w).item();
  CHECK(full == doctest::Approx(occ + ce).epsilon(1e-12));

  // unannotated frame: voxel term vanishes
  LabelGrid unann = make_label_grid(2, 2, 1, kIgnoreLabel);
  double uon = fusion_loss(y3d, unann, y2d, px, w, w).item();
  CHECK(uon == doctest::Approx(ce).epsilon(1e-12));
}

TEST_CASE("evaluate basics") {
  LabelGrid gt = make_label_grid(2, 2, 2);
  gt.labels = {0, 1, 2, 2, 0, 0, 1, kIgnoreLabel};

  SUBCASE("perfect prediction") {
    auto res = evaluate(gt, gt, 3);
    CHECK(res.iou == doctest::Approx(100.0));
    CHECK(res.miou == doctest::Approx(100.0));
  }

  SUBCASE("all free prediction on half-occupied scene") {
    LabelGrid pred = make_label_grid(2, 2, 2, 0);
    auto res = evaluate(pred, gt, 3);
    CHECK(res.iou == doctest::Approx(0.0));
    CHECK(res.miou == doctest::Approx(0.0));
  }

  SUBCASE("hand confusion matrix") {
    // 3 classes; gt: class1 x3, class2 x2, free x3 (one ignored excluded)
    LabelGrid pred = make_label_grid(2, 2, 2);
    pred.labels = {0, 1, 1, 2, 1, 0, 1, 0};
    // vs gt            {0, 1, 2, 2, 0, 0, 1, ign}
    auto res = evaluate(pred, gt, 3);
    // class 1: tp=2 (idx1, idx6), fp=2 (idx2 gt2, idx4 gt0), fn=0 -> 50%
    CHECK(res.per_class[1] == doctest::Approx(100.0 * 2.0 / 4.0));
    // class 2: tp=1 (idx3), fp=0, fn=1 (idx2) -> 50%
    CHECK(res.per_class[2] == doctest::Approx(100.0 * 1.0 / 2.0));
    CHECK(res.miou == doctest::Approx(50.0));
    // occupancy: occupied gt = {1,2,3,6}; occupied pred = {1,2,3,4,6}; inter=4, union=5
    CHECK(res.iou == doctest::Approx(100.0 * 4.0 / 5.0));
  }
}

TEST_CASE("evaluate matches brute force confusion oracle on random grids") {
  Rng rng(5150);
  for (int rep = 0; rep < 30; ++rep) {
    int nx = 2 + static_cast<int>(rng.below(15));
    int ny = 2 + static_cast<int>(rng.below(15));
    int nz = 1 + static_cast<int>(rng.below(15));
    int m = 3 + static_cast<int>(rng.below(8));
    LabelGrid pred = make_label_grid(nx, ny, nz);
    LabelGrid gt = make_label_grid(nx, ny, nz);
    for (auto& l : pred.labels) l = static_cast<uint16_t>(rng.below(static_cast<uint64_t>(m)));
    for (auto& l : gt.labels)
      l = rng.bernoulli(0.05) ? kIgnoreLabel : static_cast<uint16_t>(rng.below(static_cast<uint64_t>(m)));
    auto res = evaluate(pred, gt, m);

    // independent recomputation
    std::vector<std::vector<int64_t>> cm(static_cast<size_t>(m), std::vector<int64_t>(static_cast<size_t>(m), 0));
    for (size_t i = 0; i < gt.labels.size(); ++i)
      if (gt.labels[i] != kIgnoreLabel) cm[gt.labels[i]][pred.labels[i]]++;
    double sum = 0.0;
    int present = 0;
    for (int c = 1; c < m; ++c) {
      int64_t tp = cm[static_cast<size_t>(c)][static_cast<size_t>(c)], fp = 0, fn = 0;
      for (int o = 0; o < m; ++o)
        if (o != c) {
          fp += cm[static_cast<size_t>(o)][static_cast<size_t>(c)];
          fn += cm[static_cast<size_t>(c)][static_cast<size_t>(o)];
        }
      if (tp + fp + fn == 0) continue;
      sum += 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
      present++;
    }
    double want_miou = present ? sum / present : 0.0;
    CHECK(res.miou == doctest::Approx(want_miou).epsilon(1e-12));

    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < gt.labels.size(); ++i) {
      if (gt.labels[i] == kIgnoreLabel) continue;
      bool go = gt.labels[i] >= 1, po = pred.labels[i] >= 1;
      if (go && po) inter++;
      if (go || po) uni++;
    }
    double want_iou = uni ? 100.0 * static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
    CHECK(res.iou == doctest::Approx(want_iou).epsilon(1e-12));
  }
}

TEST_CASE("miou invariant under joint permutation") {
  Rng rng(888);
  LabelGrid pred = make_label_grid(4, 4, 4);
  LabelGrid gt = make_label_grid(4, 4, 4);
  for (auto& l : pred.labels) l = static_cast<uint16_t>(rng.below(5));
  for (auto& l : gt.labels) l = static_cast<uint16_t>(rng.below(5));
  auto base = evaluate(pred, gt, 5);

  std::vector<size_t> perm(pred.labels.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  LabelGrid pred2 = pred, gt2 = gt;
  for (size_t i = 0; i < perm.size(); ++i) {
    pred2.labels[i] = pred.labels[perm[i]];
    gt2.labels[i] = gt.labels[perm[i]];
  }
  auto shuffled = evaluate(pred2, gt2, 5);
  CHECK(shuffled.miou == doctest::Approx(base.miou).epsilon(1e-12));
  CHECK(shuffled.iou == doctest::Approx(base.iou).epsilon(1e-12));
}

TEST_CASE("interval sampling") {
  CHECK(interval_sample(10, 0.1) == std::vector<int>{0});
  CHECK(interval_sample(20, 0.1) == std::vector<int>{0, 10});
  auto s = interval_sample(100, 0.1);
  REQUIRE(s.size() == 10);
  for (size_t i = 1; i < s.size(); ++i) CHECK(s[i] - s[i - 1] == 10);
  CHECK(interval_sample(7, 1.0) == std::vector<int>{0, 1, 2, 3, 4, 5, 6});

  // size and gap properties on random fractions
  Rng rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    int n = 5 + static_cast<int>(rng.below(200));
    double f = rng.uniform(0.05, 1.0);
    auto idx = interval_sample(n, f);
    REQUIRE_FALSE(idx.empty());
    CHECK(idx.front() == 0);
    double target = f * n;
    CHECK(std::fabs(static_cast<double>(idx.size()) - target) <= 1.0 + 1e-9);
    int gmin = n, gmax = 0;
    for (size_t i = 1; i < idx.size(); ++i) {
      CHECK(idx[i] > idx[i - 1]);
      gmin = std::min(gmin, idx[i] - idx[i - 1]);
      gmax = std::max(gmax, idx[i] - idx[i - 1]);
    }
    if (idx.size() > 2) CHECK(gmax - gmin <= 1);
  }
}
