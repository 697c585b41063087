#include "semocc/geometric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semocc {

Tensor reduce_grid_to_plane(const Tensor& grid, char axis) {
  if (grid.rank() != 4)
    throw std::invalid_argument("reduce_grid_to_plane: expected (C,X,Y,Z), got " +
                                shape_str(grid.shape()));
  int ax;
  switch (axis) {
    case 'x': ax = 1; break;
    case 'y': ax = 2; break;
    case 'z': ax = 3; break;
    default: throw std::invalid_argument("reduce_grid_to_plane: axis must be x, y or z");
  }
  return scale(sum_axis(grid, ax), 1.0 / static_cast<double>(grid.dim(ax)));
}

FrameFuser::FrameFuser(ParamRegistry& reg, const std::string& name, int channels, int frames,
                       Rng& rng) {
  // identity-at-mean start: out channel c reads channel c of every frame
  Tensor k = Tensor::zeros({channels, channels, frames});
  for (int c = 0; c < channels; ++c)
    for (int n = 0; n < frames; ++n)
      k.data()[(static_cast<size_t>(c) * channels + c) * frames + n] =
          1.0 / static_cast<double>(frames);
  // small noise so channels are not locked together
  for (auto& v : k.data()) v += rng.normal(0.0, 0.02);
  kernel = reg.add(name + ".kernel", k);
}

Tensor FrameFuser::fuse(const std::vector<Tensor>& grids) const {
  if (grids.empty()) throw std::invalid_argument("fuse_frames: no input grids");
  const int n = static_cast<int>(grids.size());
  const int c = kernel.dim(0);
  if (kernel.dim(2) != n)
    throw std::invalid_argument("fuse_frames: kernel built for " + std::to_string(kernel.dim(2)) +
                                " frames, got " + std::to_string(n));
  const auto& shape = grids[0].shape();
  for (const auto& g : grids)
    if (g.shape() != shape)
      throw std::invalid_argument("fuse_frames: shape mismatch " + shape_str(g.shape()) + " vs " +
                                  shape_str(shape));
  if (shape[0] != c)
    throw std::invalid_argument("fuse_frames: channel mismatch " + shape_str(shape));
  int64_t v = 1;
  for (size_t i = 1; i < shape.size(); ++i) v *= shape[static_cast<size_t>(i)];
  // rows indexed (c', frame) to match the kernel layout (C, C, N)
  std::vector<Tensor> flat;
  flat.reserve(grids.size());
  for (const auto& g : grids) flat.push_back(reshape(g, {1, static_cast<int>(c * v)}));
  Tensor stacked = reshape(concat(flat, 0), {n, c, static_cast<int>(v)});
  Tensor rows = reshape(permute(stacked, {1, 0, 2}), {c * n, static_cast<int>(v)});
  Tensor mixed = matmul(reshape(kernel, {c, c * n}), rows);
  return reshape(mixed, shape);
}

AxisAttention::AxisAttention(ParamRegistry& reg, const std::string& name, int channels, Rng& rng) {
  wq = reg.add(name + ".wq", he_normal({channels, channels}, channels, rng));
  wk = reg.add(name + ".wk", he_normal({channels, channels}, channels, rng));
  wv = reg.add(name + ".wv", he_normal({channels, channels}, channels, rng));
  wo = reg.add(name + ".wo", Tensor::zeros({channels, channels}));
}

Tensor AxisAttention::apply(const Tensor& plane, int axis_of_rows) const {
  if (plane.rank() != 3)
    throw std::invalid_argument("axis attention: expected (C,A,B) plane, got " +
                                shape_str(plane.shape()));
  if (axis_of_rows == 2) {
    Tensor t = permute(plane, {0, 2, 1});
    return permute(apply(t, 1), {0, 2, 1});
  }
  if (axis_of_rows != 1) throw std::invalid_argument("axis attention: axis must be 1 or 2");
  const int c = plane.dim(0), a = plane.dim(1), b = plane.dim(2);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(c));
  std::vector<Tensor> columns;
  columns.reserve(static_cast<size_t>(b));
  for (int col = 0; col < b; ++col) {
    Tensor x = transpose2d(reshape(slice(plane, 2, col, 1), {c, a}));  // (A, C)
    Tensor q = matmul(x, wq);
    Tensor k = matmul(x, wk);
    Tensor v = matmul(x, wv);
    Tensor scores = scale(matmul(q, transpose2d(k)), inv_sqrt);
    Tensor att = matmul(softmax_axis(scores, 1), v);
    Tensor res = add(x, matmul(att, wo));
    columns.push_back(reshape(transpose2d(res), {c, a, 1}));
  }
  return concat(columns, 2);
}

Tensor cross_plane_synergy(const Tensor& f_xz, const Tensor& f_yzz, const Tensor& f_xy,
                           const Tensor& f_yzy) {
  Tensor f1 = plane_product(f_xz, f_yzz, PlaneShare::kZ);
  Tensor f2 = plane_product(f_xy, f_yzy, PlaneShare::kY);
  return add(f1, f2);
}

GeometryNet::GeometryNet(const GeometricConfig& cfg, const GridSpec& grid,
                         const CameraCalibration& calib, Rng& rng)
    : cfg_(cfg), grid_(grid), calib_(calib) {
  if (grid.nx % 2 != 0 || grid.ny % 2 != 0 || grid.nz % 2 != 0)
    throw std::invalid_argument("GeometryNet: grid dims must be even");
  calib.validate();
  const int c = cfg.channels;
  img_enc1_ = Conv2dLayer(reg_, "img_enc1", 3, c, 3, rng);
  img_enc2_ = Conv2dLayer(reg_, "img_enc2", c, c, 3, rng);
  lidar_enc_ = Conv3dLayer(reg_, "lidar_enc", SparseVoxelSet::kFeatureDim, c, 3, rng);
  img_frames_ = FrameFuser(reg_, "img_frames", c, cfg.frames, rng);
  lidar_frames_ = FrameFuser(reg_, "lidar_frames", c, cfg.frames, rng);
  img_down_ = Conv3dLayer(reg_, "img_down", c, c, 3, rng);
  lidar_down_ = Conv3dLayer(reg_, "lidar_down", c, c, 3, rng);
  plane_xz_ = Conv2dLayer(reg_, "plane_xz", c, c, 3, rng);
  plane_xy_ = Conv2dLayer(reg_, "plane_xy", c, c, 3, rng);
  plane_yz_ = Conv2dLayer(reg_, "plane_yz", c, c, 3, rng);
  attn_y_ = AxisAttention(reg_, "attn_y", c, rng);
  attn_z_ = AxisAttention(reg_, "attn_z", c, rng);
  post_up_ = Conv3dLayer(reg_, "post_up", c, c, 3, rng);
  head_ = LinearLayer(reg_, "head", c, 2, rng);
}

GeometryNet::Output GeometryNet::forward(const std::vector<TrainSample>& frames,
                                         uint64_t voxel_seed, int voxel_sample_count) const {
  if (frames.empty()) throw std::invalid_argument("GeometryNet: no input frames");
  if (static_cast<int>(frames.size()) != cfg_.frames)
    throw std::invalid_argument("GeometryNet: built for " + std::to_string(cfg_.frames) +
                                " frames, got " + std::to_string(frames.size()));
  std::vector<Tensor> img_grids, lidar_grids;
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    Tensor img = Tensor::from_data({3, f.image.h, f.image.w}, f.image.rgb);
    Tensor fm = relu(img_enc1_.forward(img, 2));
    fm = relu(img_enc2_.forward(fm, 2));  // stride 4
    img_grids.push_back(lift_feature_map(fm, grid_, calib_));

    auto vox = voxelize(f.cloud, grid_, derive_seed(voxel_seed, i), voxel_sample_count);
    lidar_grids.push_back(relu(lidar_enc_.forward(densify(vox, grid_), 1)));
  }
  Tensor img_grid = img_frames_.fuse(img_grids);
  Tensor lidar_grid = lidar_frames_.fuse(lidar_grids);

  // half-resolution planes
  Tensor img_half = relu(img_down_.forward(img_grid, 2));
  Tensor lidar_half = relu(lidar_down_.forward(lidar_grid, 2));

  Tensor f_xz = plane_xz_.forward(reduce_grid_to_plane(lidar_half, 'y'), 1);   // (C,X,Z)
  Tensor f_xy = plane_xy_.forward(reduce_grid_to_plane(lidar_half, 'z'), 1);   // (C,X,Y)
  Tensor f_yz = plane_yz_.forward(reduce_grid_to_plane(img_half, 'x'), 1);     // (C,Y,Z)
  Tensor f_yzy = attn_y_.apply(f_yz, 1);
  Tensor f_yzz = attn_z_.apply(f_yz, 2);

  Tensor fused_half = cross_plane_synergy(f_xz, f_yzz, f_xy, f_yzy);
  Tensor feature_grid = relu(post_up_.forward(upsample2x_3d(fused_half), 1));
  Tensor logits = head_.forward_cellwise(feature_grid);
  return {feature_grid, logits};
}

FilteredPrediction confidence_filter(const Tensor& logits, double tau) {
  if (tau <= 0.0 || tau >= 1.0)
    throw std::invalid_argument("confidence_filter: tau must lie in (0,1)");
  if (logits.rank() != 4 || logits.dim(0) != 2)
    throw std::invalid_argument("confidence_filter: expected (2,X,Y,Z) logits, got " +
                                shape_str(logits.shape()));
  const int nx = logits.dim(1), ny = logits.dim(2), nz = logits.dim(3);
  const int64_t cells = static_cast<int64_t>(nx) * ny * nz;
  FilteredPrediction out;
  out.labels = make_label_grid(nx, ny, nz, kIgnoreLabel);
  out.keep.nx = nx;
  out.keep.ny = ny;
  out.keep.nz = nz;
  out.keep.keep.assign(static_cast<size_t>(cells), 0);
  const auto& d = logits.data();
  for (int64_t v = 0; v < cells; ++v) {
    double a = d[static_cast<size_t>(v)];
    double b = d[static_cast<size_t>(cells + v)];
    double m = std::max(a, b);
    double ea = std::exp(a - m), eb = std::exp(b - m);
    double conf = std::max(ea, eb) / (ea + eb);
    if (conf >= tau) {
      out.labels.labels[static_cast<size_t>(v)] = b > a ? 1 : 0;
      out.keep.keep[static_cast<size_t>(v)] = 1;
    }
  }
  return out;
}

std::vector<SupervisionFrame> merge_supervision(
    const std::map<int, LabelGrid>& annotated,
    const std::map<int, FilteredPrediction>& pseudo) {
  for (const auto& [id, p] : pseudo)
    if (annotated.count(id))
      throw std::invalid_argument("merge_supervision: frame " + std::to_string(id) +
                                  " appears in both the annotated and pseudo sets");
  std::vector<SupervisionFrame> out;
  out.reserve(annotated.size() + pseudo.size());
  for (const auto& [id, g] : annotated) out.push_back({id, true, g, std::nullopt});
  for (const auto& [id, p] : pseudo) out.push_back({id, false, p.labels, p.keep});
  std::sort(out.begin(), out.end(),
            [](const SupervisionFrame& a, const SupervisionFrame& b) { return a.frame_id < b.frame_id; });
  return out;
}

}  // namespace semocc
