#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "semocc/fusion.hpp"
#include "semocc/losses.hpp"
#include "semocc/optim.hpp"
#include "semocc/scene.hpp"

using namespace semocc;

TEST_CASE("dual block identity and exchange") {
  Rng rng(3);

  SUBCASE("rho zero with zero output projections is the exact identity") {
    ParamRegistry reg;
    DualMambaBlock block(reg, "b", 4, {2, 2, 2}, 0.0, rng);
    auto order = hilbert_order(2, 2, 2);
    Tensor sem = Tensor::randn({4, 2, 2, 2}, rng, 1.0);
    Tensor geo = Tensor::randn({4, 2, 2, 2}, rng, 1.0);
    auto [s, g] = block.forward(sem, geo, order);
    CHECK(s.data() == sem.data());  // bitwise
    CHECK(g.data() == geo.data());
    CHECK(block.exchanged_channels() == 0);
  }

  SUBCASE("rho one fully swaps the scanned inputs") {
    ParamRegistry reg1, reg0;
    DualMambaBlock swap_block(reg1, "x", 3, {2, 2, 1}, 1.0, rng);
    DualMambaBlock keep_block(reg0, "x", 3, {2, 2, 1}, 0.0, rng);
    CHECK(swap_block.exchanged_channels() == 3);
    // identical parameters, zero positional embeddings
    ParamMap shared;
    reg1.export_params(shared, "");
    shared.at("x.pos_sem") = Tensor::zeros({3, 2, 2, 1});
    shared.at("x.pos_geo") = Tensor::zeros({3, 2, 2, 1});
    Rng wrng(9);
    for (auto& [name, t] : shared)
      if (name.find(".o_") != std::string::npos && name.find(".w") != std::string::npos)
        for (auto& v : t.data()) v = wrng.uniform(-0.5, 0.5);
    reg1.import_params(shared, "");
    reg0.import_params(shared, "");

    auto order = hilbert_order(2, 2, 1);
    Tensor sem = Tensor::randn({3, 2, 2, 1}, rng, 1.0);
    Tensor geo = Tensor::randn({3, 2, 2, 1}, rng, 1.0);
    auto [s1, g1] = swap_block.forward(sem, geo, order);
    auto [s0, g0] = keep_block.forward(geo, sem, order);
    // the swapped block's sem branch scanned geo, so the residual updates match
    for (int64_t i = 0; i < sem.size(); ++i) {
      double upd1 = s1.data()[static_cast<size_t>(i)] - sem.data()[static_cast<size_t>(i)];
      double upd0 = s0.data()[static_cast<size_t>(i)] - geo.data()[static_cast<size_t>(i)];
      CHECK(upd1 == doctest::Approx(upd0).epsilon(1e-12));
      double gupd1 = g1.data()[static_cast<size_t>(i)] - geo.data()[static_cast<size_t>(i)];
      double gupd0 = g0.data()[static_cast<size_t>(i)] - sem.data()[static_cast<size_t>(i)];
      CHECK(gupd1 == doctest::Approx(gupd0).epsilon(1e-12));
    }
  }

  SUBCASE("exchanged channel count is floor(rho C)") {
    ParamRegistry reg;
    DualMambaBlock b1(reg, "a", 8, {2, 2, 2}, 0.5, rng);
    CHECK(b1.exchanged_channels() == 4);
    DualMambaBlock b2(reg, "c", 5, {2, 2, 2}, 0.5, rng);
    CHECK(b2.exchanged_channels() == 2);
  }
}

TEST_CASE("dual block matches a straight-line reference") {
  // 2x2x2 grid, C=2, fixed params; compute the expected output by hand ops
  Rng rng(11);
  ParamRegistry reg;
  const int c = 2;
  DualMambaBlock block(reg, "ref", c, {2, 2, 2}, 0.5, rng);
  auto order = hilbert_order(2, 2, 2);
  Tensor sem = Tensor::randn({c, 2, 2, 2}, rng, 1.0);
  Tensor geo = Tensor::randn({c, 2, 2, 2}, rng, 1.0);

  // give the output projections real values so the scan output matters
  ParamMap params;
  reg.export_params(params, "");
  Rng wrng(5);
  for (auto& [name, t] : params)
    if (name.find(".o_") != std::string::npos && name.find(".w") != std::string::npos)
      for (auto& v : t.data()) v = wrng.uniform(-0.5, 0.5);

  auto [s_out, g_out] = block.forward(sem, geo, order);

  // reference: replicate per definition with plain loops
  const int64_t cells = 8;
  auto grid_val = [&](const Tensor& t, int ch, int64_t cell) {
    return t.data()[static_cast<size_t>(ch * cells + cell)];
  };

  // positional embeddings, then exchange of the leading floor(0.5*2) = 1 channel
  const auto& pos_s = params.at("ref.pos_sem").data();
  const auto& pos_g = params.at("ref.pos_geo").data();
  Tensor s_emb = Tensor::zeros({c, 2, 2, 2});
  Tensor g_emb = Tensor::zeros({c, 2, 2, 2});
  for (int64_t i = 0; i < s_emb.size(); ++i) {
    s_emb.data()[static_cast<size_t>(i)] =
        sem.data()[static_cast<size_t>(i)] + pos_s[static_cast<size_t>(i)];
    g_emb.data()[static_cast<size_t>(i)] =
        geo.data()[static_cast<size_t>(i)] + pos_g[static_cast<size_t>(i)];
  }
  Tensor s_x = Tensor::zeros({c, 2, 2, 2});
  Tensor g_x = Tensor::zeros({c, 2, 2, 2});
  for (int64_t v = 0; v < cells; ++v) {
    s_x.data()[static_cast<size_t>(v)] = g_emb.data()[static_cast<size_t>(v)];
    g_x.data()[static_cast<size_t>(v)] = s_emb.data()[static_cast<size_t>(v)];
    s_x.data()[static_cast<size_t>(cells + v)] = s_emb.data()[static_cast<size_t>(cells + v)];
    g_x.data()[static_cast<size_t>(cells + v)] = g_emb.data()[static_cast<size_t>(cells + v)];
  }

  // branch outputs restored to grid and residual-added
  auto check_branch = [&](const Tensor& x_in, const Tensor& residual, const Tensor& got,
                          const std::string& a, const std::string& b, const std::string& cc,
                          const std::string& o) {
    std::vector<double> seq(static_cast<size_t>(cells) * c);
    for (int64_t t = 0; t < cells; ++t)
      for (int ch = 0; ch < c; ++ch)
        seq[static_cast<size_t>(t) * c + ch] =
            grid_val(x_in, ch, order.seq_to_cell[static_cast<size_t>(t)]);
    auto lin = [&](const std::vector<double>& x, const std::string& name) {
      const auto& w = params.at(name + ".w").data();
      const auto& bb = params.at(name + ".b").data();
      std::vector<double> out(x.size());
      for (int64_t t = 0; t < cells; ++t)
        for (int j = 0; j < c; ++j) {
          double s = bb[static_cast<size_t>(j)];
          for (int k = 0; k < c; ++k)
            s += x[static_cast<size_t>(t) * c + k] * w[static_cast<size_t>(j) * c + k];
          out[static_cast<size_t>(t) * c + j] = s;
        }
      return out;
    };
    auto av = lin(seq, a);
    for (auto& v : av) v = 1.0 / (1.0 + std::exp(-v));
    auto bv = lin(seq, b);
    auto cv = lin(seq, cc);
    auto y = semocc::testing::scan_reference(seq, av, bv, cv, static_cast<int>(cells), c);
    auto ov = lin(y, o);
    for (int ch = 0; ch < c; ++ch)
      for (int64_t v = 0; v < cells; ++v) {
        double want = residual.data()[static_cast<size_t>(ch * cells + v)] +
                      ov[static_cast<size_t>(order.cell_to_seq[static_cast<size_t>(v)]) * c + ch];
        CHECK(got.data()[static_cast<size_t>(ch * cells + v)] ==
              doctest::Approx(want).epsilon(1e-12));
      }
  };
  check_branch(s_x, sem, s_out, "ref.a_sem", "ref.b_sem", "ref.c_sem", "ref.o_sem");
  check_branch(g_x, geo, g_out, "ref.a_geo", "ref.b_geo", "ref.c_geo", "ref.o_geo");
}

TEST_CASE("fusion stack contracts") {
  Rng rng(21);
  FusionConfig cfg;
  cfg.channels = 4;
  cfg.rho = 0.5;

  SUBCASE("output dims equal input dims with internal padding") {
    ParamRegistry reg;
    FusionStack stack(reg, cfg, {6, 5, 3}, rng);
    CHECK(stack.padded_dims() == std::array<int, 3>{16, 16, 16});
    Tensor sem = Tensor::randn({4, 6, 5, 3}, rng, 1.0);
    Tensor geo = Tensor::randn({4, 6, 5, 3}, rng, 1.0);
    Tensor out = stack.forward(sem, geo);
    CHECK(out.shape() == std::vector<int>{4, 6, 5, 3});
  }

  SUBCASE("gradient reaches both inputs for rho > 0") {
    ParamRegistry reg;
    FusionStack stack(reg, cfg, {4, 4, 4}, rng);
    Tensor sem = Tensor::randn({4, 4, 4, 4}, rng, 1.0, true);
    Tensor geo = Tensor::randn({4, 4, 4, 4}, rng, 1.0, true);
    Tensor out = stack.forward(sem, geo);
    sum_all(mul(out, out)).backward();
    double gs = 0.0, gg = 0.0;
    for (double v : sem.grad()) gs += std::fabs(v);
    for (double v : geo.grad()) gg += std::fabs(v);
    CHECK(gs > 0.0);
    CHECK(gg > 0.0);
  }

  SUBCASE("deterministic forward") {
    ParamRegistry reg;
    FusionStack stack(reg, cfg, {4, 4, 4}, rng);
    Tensor sem = Tensor::randn({4, 4, 4, 4}, rng, 1.0);
    Tensor geo = Tensor::randn({4, 4, 4, 4}, rng, 1.0);
    Tensor a = stack.forward(sem, geo);
    Tensor b = stack.forward(sem, geo);
    CHECK(a.data() == b.data());
  }
}

TEST_CASE("scatter projection") {
  GridSpec g{2, 2, 1, {-0.5, -0.5, 2.0}, 0.5};
  CameraCalibration calib;
  calib.K = {{{2.0, 0.0, 2.0}, {0.0, 2.0, 2.0}, {0.0, 0.0, 1.0}}};
  calib.T = {{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};
  calib.image_h = 4;
  calib.image_w = 4;
  auto projector = ScatterProjector::build(g, calib);

  SUBCASE("two voxels onto one pixel sum") {
    // single-pixel projector built by hand
    ScatterProjector p;
    p.out_h = 1;
    p.out_w = 1;
    p.pixel_of_voxel = {0, 0};
    p.depth = {1.0, 3.0};
    Tensor grid = Tensor::from_data({1, 2, 1, 1}, {1.0, 2.0});
    Tensor out = scatter_project(grid, p, ProjectionMode::kPlain);
    CHECK(out.data() == std::vector<double>{3.0});
    Tensor outw = scatter_project(grid, p, ProjectionMode::kDistanceWeighted);
    CHECK(outw.data()[0] == doctest::Approx(1.0 / 2.0 + 2.0 / 4.0).epsilon(1e-15));
  }

  SUBCASE("plain mode conserves mass") {
    Rng rng(2);
    Tensor grid = Tensor::randn({3, 2, 2, 1}, rng, 1.0);
    Tensor out = scatter_project(grid, projector, ProjectionMode::kPlain);
    const int64_t cells = 4;
    for (int c = 0; c < 3; ++c) {
      double in_sum = 0.0, out_sum = 0.0;
      for (int64_t v = 0; v < cells; ++v)
        if (projector.pixel_of_voxel[static_cast<size_t>(v)] >= 0)
          in_sum += grid.data()[static_cast<size_t>(c * cells + v)];
      for (int i = 0; i < 16; ++i) out_sum += out.data()[static_cast<size_t>(c * 16 + i)];
      CHECK(std::fabs(out_sum - in_sum) <= 1e-9 * std::max(1.0, std::fabs(in_sum)));
    }
  }

  SUBCASE("matches the accumulation loop in both modes") {
    Rng rng(7);
    GridSpec g2{4, 4, 2, {-1, -1, 1.5}, 0.5};
    auto proj2 = ScatterProjector::build(g2, calib);
    Tensor grid = Tensor::randn({2, 4, 4, 2}, rng, 1.0);
    const int64_t cells = g2.cell_count();
    for (auto mode : {ProjectionMode::kPlain, ProjectionMode::kDistanceWeighted}) {
      Tensor out = scatter_project(grid, proj2, mode);
      std::vector<double> want(static_cast<size_t>(2 * 16), 0.0);
      for (int64_t v = 0; v < cells; ++v) {
        int64_t pix = proj2.pixel_of_voxel[static_cast<size_t>(v)];
        if (pix < 0) continue;
        double w = mode == ProjectionMode::kPlain
                       ? 1.0
                       : 1.0 / (1.0 + proj2.depth[static_cast<size_t>(v)]);
        for (int c = 0; c < 2; ++c)
          want[static_cast<size_t>(c * 16 + pix)] +=
              w * grid.data()[static_cast<size_t>(c * cells + v)];
      }
      REQUIRE(out.data() == want);  // exact, same accumulation order
    }
  }

  SUBCASE("gradient distributes back to contributing voxels") {
    Tensor grid = Tensor::zeros({1, 2, 2, 1}, true);
    Tensor out = scatter_project(grid, projector, ProjectionMode::kPlain);
    sum_all(out).backward();
    const int64_t cells = 4;
    for (int64_t v = 0; v < cells; ++v) {
      double want = projector.pixel_of_voxel[static_cast<size_t>(v)] >= 0 ? 1.0 : 0.0;
      CHECK(grid.grad()[static_cast<size_t>(v)] == want);
    }
  }
}

TEST_CASE("fusion model shape contracts and memorization") {
  SceneSpec spec;
  spec.seed = 77;
  spec.grid = GridSpec{16, 16, 8, {0, 0, 0}, 0.8};
  auto bundle = generate_scene(spec);
  Rng rng(31);
  FusionConfig cfg;
  cfg.channels = 6;
  cfg.num_classes = kDeskClassCount;
  FusionModel model(cfg, {16, 16, 8}, 8, 4, rng);
  auto projector = ScatterProjector::build(spec.grid, bundle.calib);

  Tensor img_feats = Tensor::randn({5, 16, 16, 8}, rng, 0.3);
  Tensor lidar_feats = Tensor::randn({3, 16, 16, 8}, rng, 0.3);
  Tensor geo_grid = Tensor::randn({4, 16, 16, 8}, rng, 0.3);

  auto out = model.forward(img_feats, lidar_feats, geo_grid, projector, ProjectionMode::kPlain);
  CHECK(out.voxel_logits.shape() == std::vector<int>{kDeskClassCount, 16, 16, 8});
  CHECK(out.projected_logits.shape() == std::vector<int>{kDeskClassCount, 64, 64});
  CHECK(out.fused_grid.shape() == std::vector<int>{6, 16, 16, 8});

  // overfit one scene: voxel accuracy vs the ground truth
  std::vector<double> w(kDeskClassCount, 1.0);
  AdamW opt(model.params().tensors(), {.learning_rate = 5e-3, .weight_decay = 0.0});
  for (int step = 0; step < 80; ++step) {
    auto o = model.forward(img_feats, lidar_feats, geo_grid, projector, ProjectionMode::kPlain);
    Tensor loss = add(weighted_cross_entropy(o.voxel_logits, bundle.voxel_gt.labels, w),
                      scale(sum_all(o.projected_logits), 0.0));
    loss.backward();
    opt.step();
  }
  auto o = model.forward(img_feats, lidar_feats, geo_grid, projector, ProjectionMode::kPlain);
  const int64_t cells = spec.grid.cell_count();
  int64_t correct = 0;
  for (int64_t v = 0; v < cells; ++v) {
    int best = 0;
    double bv = -1e300;
    for (int c = 0; c < kDeskClassCount; ++c) {
      double val = o.voxel_logits.data()[static_cast<size_t>(c * cells + v)];
      if (val > bv) {
        bv = val;
        best = c;
      }
    }
    if (best == bundle.voxel_gt.labels[static_cast<size_t>(v)]) ++correct;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(cells) >= 0.9);
}
