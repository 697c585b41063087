#include "semocc/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace semocc {

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || bias.dim(0) != x.dim(0))
    throw std::invalid_argument("add_channel_bias: bias " + shape_str(bias.shape()) +
                                " does not match channels of " + shape_str(x.shape()));
  const int c = x.dim(0);
  int64_t spatial = 1;
  for (int i = 1; i < x.rank(); ++i) spatial *= x.dim(i);
  Tensor ones = Tensor::full({1, static_cast<int>(spatial)}, 1.0);
  Tensor tiled = matmul(reshape(bias, {c, 1}), ones);
  Tensor flat = add(reshape(x, {c, static_cast<int>(spatial)}), tiled);
  return reshape(flat, x.shape());
}

Tensor linear_cellwise(const Tensor& x, const Tensor& w, const Tensor& bias) {
  const int ci = x.dim(0);
  if (w.rank() != 2 || w.dim(1) != ci)
    throw std::invalid_argument("linear_cellwise: weight " + shape_str(w.shape()) +
                                " does not match input " + shape_str(x.shape()));
  int64_t spatial = 1;
  for (int i = 1; i < x.rank(); ++i) spatial *= x.dim(i);
  Tensor flat = reshape(x, {ci, static_cast<int>(spatial)});
  Tensor out = add_channel_bias(matmul(w, flat), bias);
  std::vector<int> shape = x.shape();
  shape[0] = w.dim(0);
  return reshape(out, shape);
}

Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng) {
  double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  return Tensor::randn(std::move(shape), rng, stddev);
}

Conv2dLayer::Conv2dLayer(ParamRegistry& reg, const std::string& name, int cin, int cout, int k,
                         Rng& rng) {
  w = reg.add(name + ".w", he_normal({cout, cin, k, k}, cin * k * k, rng));
  b = reg.add(name + ".b", Tensor::zeros({cout}));
}

Tensor Conv2dLayer::forward(const Tensor& x, int stride) const {
  return add_channel_bias(conv2d(x, w, stride), b);
}

Conv3dLayer::Conv3dLayer(ParamRegistry& reg, const std::string& name, int cin, int cout, int k,
                         Rng& rng) {
  w = reg.add(name + ".w", he_normal({cout, cin, k, k, k}, cin * k * k * k, rng));
  b = reg.add(name + ".b", Tensor::zeros({cout}));
}

Tensor Conv3dLayer::forward(const Tensor& x, int stride) const {
  return add_channel_bias(conv3d(x, w, stride), b);
}

LinearLayer::LinearLayer(ParamRegistry& reg, const std::string& name, int cin, int cout, Rng& rng,
                         bool zero_init) {
  w = reg.add(name + ".w", zero_init ? Tensor::zeros({cout, cin})
                                     : he_normal({cout, cin}, cin, rng));
  b = reg.add(name + ".b", Tensor::zeros({cout}));
}

Tensor LinearLayer::forward_rows(const Tensor& x) const {
  Tensor out = matmul(x, transpose2d(w));
  const int n = x.dim(0), co = w.dim(0);
  Tensor ones = Tensor::full({n, 1}, 1.0);
  return add(out, matmul(ones, reshape(b, {1, co})));
}

}  // namespace semocc
