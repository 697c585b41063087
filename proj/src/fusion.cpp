#include "semocc/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace semocc {

DualMambaBlock::DualMambaBlock(ParamRegistry& reg, const std::string& name, int channels,
                               std::array<int, 3> dims, double rho, Rng& rng)
    : channels_(channels), dims_(dims) {
  if (rho < 0.0 || rho > 1.0)
    throw std::invalid_argument("dual block: rho must lie in [0,1]");
  exchange_ = static_cast<int>(std::floor(rho * channels));
  pos_sem_ = reg.add(name + ".pos_sem",
                     Tensor::randn({channels, dims[0], dims[1], dims[2]}, rng, 0.02));
  pos_geo_ = reg.add(name + ".pos_geo",
                     Tensor::randn({channels, dims[0], dims[1], dims[2]}, rng, 0.02));
  gate_a_sem_ = LinearLayer(reg, name + ".a_sem", channels, channels, rng);
  gate_b_sem_ = LinearLayer(reg, name + ".b_sem", channels, channels, rng);
  gate_c_sem_ = LinearLayer(reg, name + ".c_sem", channels, channels, rng);
  out_sem_ = LinearLayer(reg, name + ".o_sem", channels, channels, rng, /*zero_init=*/true);
  gate_a_geo_ = LinearLayer(reg, name + ".a_geo", channels, channels, rng);
  gate_b_geo_ = LinearLayer(reg, name + ".b_geo", channels, channels, rng);
  gate_c_geo_ = LinearLayer(reg, name + ".c_geo", channels, channels, rng);
  out_geo_ = LinearLayer(reg, name + ".o_geo", channels, channels, rng, /*zero_init=*/true);
}

Tensor DualMambaBlock::branch_scan(const Tensor& grid, const HilbertOrder& order,
                                   bool semantic) const {
  const int c = channels_;
  const int64_t cells = static_cast<int64_t>(dims_[0]) * dims_[1] * dims_[2];
  if (order.size() != cells)
    throw std::invalid_argument("dual block: hilbert order does not match grid dims");
  // linearize cells along the curve: seq[t, ch] = grid[ch, cell(t)]
  std::vector<int64_t> to_seq(static_cast<size_t>(cells) * c);
  for (int64_t t = 0; t < cells; ++t)
    for (int ch = 0; ch < c; ++ch)
      to_seq[static_cast<size_t>(t) * c + ch] =
          static_cast<int64_t>(ch) * cells + order.seq_to_cell[static_cast<size_t>(t)];
  Tensor seq = gather(grid, to_seq, {static_cast<int>(cells), c});
  const auto& ga = semantic ? gate_a_sem_ : gate_a_geo_;
  const auto& gb = semantic ? gate_b_sem_ : gate_b_geo_;
  const auto& gc = semantic ? gate_c_sem_ : gate_c_geo_;
  const auto& go = semantic ? out_sem_ : out_geo_;
  Tensor a = sigmoid(ga.forward_rows(seq));
  Tensor b = gb.forward_rows(seq);
  Tensor cg = gc.forward_rows(seq);
  Tensor y = go.forward_rows(selective_scan(seq, a, b, cg));
  // restore the 3D layout
  std::vector<int64_t> to_grid(static_cast<size_t>(cells) * c);
  for (int ch = 0; ch < c; ++ch)
    for (int64_t v = 0; v < cells; ++v)
      to_grid[static_cast<size_t>(ch) * cells + v] =
          order.cell_to_seq[static_cast<size_t>(v)] * c + ch;
  return reshape(gather(y, to_grid, {c, dims_[0], dims_[1], dims_[2]}),
                 {c, dims_[0], dims_[1], dims_[2]});
}

std::pair<Tensor, Tensor> DualMambaBlock::forward(const Tensor& sem, const Tensor& geo,
                                                  const HilbertOrder& order) const {
  std::vector<int> want = {channels_, dims_[0], dims_[1], dims_[2]};
  if (sem.shape() != want || geo.shape() != want)
    throw std::invalid_argument("dual block: inputs " + shape_str(sem.shape()) + "/" +
                                shape_str(geo.shape()) + " do not match " + shape_str(want));
  Tensor s = add(sem, pos_sem_);
  Tensor g = add(geo, pos_geo_);
  Tensor s_in = s, g_in = g;
  if (exchange_ == channels_) {
    s_in = g;
    g_in = s;
  } else if (exchange_ > 0) {
    s_in = concat({slice(g, 0, 0, exchange_), slice(s, 0, exchange_, channels_ - exchange_)}, 0);
    g_in = concat({slice(s, 0, 0, exchange_), slice(g, 0, exchange_, channels_ - exchange_)}, 0);
  }
  Tensor s_out = add(sem, branch_scan(s_in, order, true));
  Tensor g_out = add(geo, branch_scan(g_in, order, false));
  return {s_out, g_out};
}

namespace {

int pad_to_multiple(int v, int m) { return ((v + m - 1) / m) * m; }

}  // namespace

FusionStack::FusionStack(ParamRegistry& reg, const FusionConfig& cfg,
                         std::array<int, 3> grid_dims, Rng& rng)
    : cfg_(cfg), dims_(grid_dims) {
  padded_ = {pad_to_multiple(grid_dims[0], 16), pad_to_multiple(grid_dims[1], 16),
             pad_to_multiple(grid_dims[2], 16)};
  const int c = cfg.channels;
  std::array<int, 3> d = padded_;
  for (int stage = 0; stage < 4; ++stage) {
    orders_.push_back(hilbert_order(d[0], d[1], d[2]));
    down_blocks_.emplace_back(reg, "down" + std::to_string(stage), c, d, cfg.rho, rng);
    up_blocks_.emplace_back(reg, "up" + std::to_string(stage), c, d, cfg.rho, rng);
    down_sem_.emplace_back(reg, "down_sem" + std::to_string(stage), c, c, 3, rng);
    down_geo_.emplace_back(reg, "down_geo" + std::to_string(stage), c, c, 3, rng);
    up_sem_.emplace_back(reg, "up_sem" + std::to_string(stage), c, c, 3, rng);
    up_geo_.emplace_back(reg, "up_geo" + std::to_string(stage), c, c, 3, rng);
    d = {d[0] / 2, d[1] / 2, d[2] / 2};
  }
  mix_ = LinearLayer(reg, "mix", 2 * c, c, rng);
}

Tensor FusionStack::forward(const Tensor& sem_grid, const Tensor& geo_grid) const {
  std::vector<int> want = {cfg_.channels, dims_[0], dims_[1], dims_[2]};
  if (sem_grid.shape() != want || geo_grid.shape() != want)
    throw std::invalid_argument("fuse_stack: inputs " + shape_str(sem_grid.shape()) + "/" +
                                shape_str(geo_grid.shape()) + " do not match " + shape_str(want));
  // embed into the zero-padded volume; padding content is zero by construction
  Tensor s = pad3d(sem_grid, padded_[0], padded_[1], padded_[2]);
  Tensor g = pad3d(geo_grid, padded_[0], padded_[1], padded_[2]);
  std::vector<Tensor> skip_s, skip_g;
  for (int stage = 0; stage < 4; ++stage) {
    auto [so, go] = down_blocks_[static_cast<size_t>(stage)].forward(s, g, orders_[static_cast<size_t>(stage)]);
    skip_s.push_back(so);
    skip_g.push_back(go);
    s = relu(down_sem_[static_cast<size_t>(stage)].forward(so, 2));
    g = relu(down_geo_[static_cast<size_t>(stage)].forward(go, 2));
  }
  for (int stage = 3; stage >= 0; --stage) {
    s = add(relu(up_sem_[static_cast<size_t>(stage)].forward(upsample2x_3d(s), 1)),
            skip_s[static_cast<size_t>(stage)]);
    g = add(relu(up_geo_[static_cast<size_t>(stage)].forward(upsample2x_3d(g), 1)),
            skip_g[static_cast<size_t>(stage)]);
    auto [so, go] = up_blocks_[static_cast<size_t>(stage)].forward(s, g, orders_[static_cast<size_t>(stage)]);
    s = so;
    g = go;
  }
  Tensor fused = mix_.forward_cellwise(concat({s, g}, 0));
  return crop3d(fused, dims_[0], dims_[1], dims_[2]);
}

ScatterProjector ScatterProjector::build(const GridSpec& grid, const CameraCalibration& calib) {
  ScatterProjector p;
  p.out_h = calib.image_h;
  p.out_w = calib.image_w;
  auto proj = project_voxel_centers(grid, calib);
  p.pixel_of_voxel.resize(proj.size(), -1);
  p.depth.resize(proj.size(), 0.0);
  for (size_t i = 0; i < proj.size(); ++i) {
    p.depth[i] = proj[i].depth;
    if (proj[i].valid)
      p.pixel_of_voxel[i] = static_cast<int64_t>(std::floor(proj[i].v)) * calib.image_w +
                            static_cast<int64_t>(std::floor(proj[i].u));
  }
  return p;
}

Tensor scatter_project(const Tensor& grid, const ScatterProjector& projector,
                       ProjectionMode mode) {
  if (grid.rank() != 4)
    throw std::invalid_argument("scatter_project: expected (C,X,Y,Z), got " +
                                shape_str(grid.shape()));
  const int c = grid.dim(0);
  const int64_t cells = grid.size() / c;
  if (static_cast<int64_t>(projector.pixel_of_voxel.size()) != cells)
    throw std::invalid_argument("scatter_project: projector built for a different grid");
  const int64_t hw = static_cast<int64_t>(projector.out_h) * projector.out_w;
  std::vector<int64_t> src_idx, dst_idx;
  std::vector<double> weights;
  for (int64_t v = 0; v < cells; ++v) {
    int64_t pix = projector.pixel_of_voxel[static_cast<size_t>(v)];
    if (pix < 0) continue;
    for (int ch = 0; ch < c; ++ch) {
      src_idx.push_back(static_cast<int64_t>(ch) * cells + v);
      dst_idx.push_back(static_cast<int64_t>(ch) * hw + pix);
      weights.push_back(1.0 / (1.0 + projector.depth[static_cast<size_t>(v)]));
    }
  }
  if (src_idx.empty()) return Tensor::zeros({c, projector.out_h, projector.out_w});
  Tensor contrib = gather(grid, src_idx, {static_cast<int>(src_idx.size())});
  if (mode == ProjectionMode::kDistanceWeighted) {
    const int contrib_count = static_cast<int>(weights.size());
    Tensor w = Tensor::from_data({contrib_count}, std::move(weights));
    contrib = mul(contrib, w);
  }
  Tensor flat = scatter_add(contrib, dst_idx, {static_cast<int>(c * hw)});
  return reshape(flat, {c, projector.out_h, projector.out_w});
}

FusionModel::FusionModel(const FusionConfig& cfg, std::array<int, 3> grid_dims, int sem_channels,
                         int geo_channels, Rng& rng)
    : cfg_(cfg),
      sem_combine_(reg_, "sem_combine", sem_channels, cfg.channels, rng),
      stack_(reg_, cfg, grid_dims, rng),
      head_voxel_(reg_, "head_voxel", cfg.channels, cfg.num_classes, rng),
      head_pixel_(reg_, "head_pixel", cfg.channels, cfg.num_classes, rng) {
  geo_adapt_ = LinearLayer(reg_, "geo_adapt", geo_channels, cfg.channels, rng);
}

FusionModel::Output FusionModel::forward(const Tensor& lifted_image_feats,
                                         const Tensor& lidar_sem_feats, const Tensor& geo_grid,
                                         const ScatterProjector& projector,
                                         ProjectionMode mode) const {
  Tensor sem_in = relu(sem_combine_.forward_cellwise(concat({lifted_image_feats, lidar_sem_feats}, 0)));
  Tensor geo_in = relu(geo_adapt_.forward_cellwise(geo_grid));
  Tensor fused = stack_.forward(sem_in, geo_in);
  Tensor voxel_logits = head_voxel_.forward_cellwise(fused);
  Tensor projected = scatter_project(fused, projector, mode);
  Tensor projected_logits = head_pixel_.forward_cellwise(projected);
  return {fused, voxel_logits, projected_logits};
}

}  // namespace semocc
