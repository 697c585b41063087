#pragma once

#include <string>
#include <utility>
#include <vector>

#include "semocc/checkpoint.hpp"
#include "semocc/tensor.hpp"

namespace semocc {

// Named parameter collection shared by all networks. Import copies buffers
// into the registered tensors so optimizer bindings stay valid.
class ParamRegistry {
 public:
  Tensor add(const std::string& name, Tensor t) {
    t.set_requires_grad(true);
    items_.emplace_back(name, t);
    return t;
  }

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    out.reserve(items_.size());
    for (const auto& [name, t] : items_) out.push_back(t);
    return out;
  }

  void export_params(ParamMap& map, const std::string& prefix) const {
    for (const auto& [name, t] : items_) map[prefix + name] = t;
  }

  void import_params(const ParamMap& map, const std::string& prefix) {
    for (auto& [name, t] : items_) {
      auto it = map.find(prefix + name);
      if (it == map.end()) throw std::runtime_error("checkpoint missing parameter " + prefix + name);
      if (it->second.shape() != t.shape())
        throw std::runtime_error("checkpoint shape mismatch for " + prefix + name + ": " +
                                 shape_str(it->second.shape()) + " vs " + shape_str(t.shape()));
      t.data() = it->second.data();
    }
  }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& [name, t] : items_) n += t.size();
    return n;
  }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

// Tiles a per-channel bias across the spatial dims of a channel-first tensor.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// Per-cell linear map of a channel-first tensor: w (Co,Ci), bias (Co).
Tensor linear_cellwise(const Tensor& x, const Tensor& w, const Tensor& bias);

// He-normal initialized weights.
Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng);

struct Conv2dLayer {
  Tensor w, b;
  Conv2dLayer() = default;
  Conv2dLayer(ParamRegistry& reg, const std::string& name, int cin, int cout, int k, Rng& rng);
  Tensor forward(const Tensor& x, int stride = 1) const;
};

struct Conv3dLayer {
  Tensor w, b;
  Conv3dLayer() = default;
  Conv3dLayer(ParamRegistry& reg, const std::string& name, int cin, int cout, int k, Rng& rng);
  Tensor forward(const Tensor& x, int stride = 1) const;
};

struct LinearLayer {
  Tensor w, b;  // w (Co, Ci)
  LinearLayer() = default;
  LinearLayer(ParamRegistry& reg, const std::string& name, int cin, int cout, Rng& rng,
              bool zero_init = false);
  // x channel-first (Ci, ...)
  Tensor forward_cellwise(const Tensor& x) const { return linear_cellwise(x, w, b); }
  // x row-major (N, Ci) -> (N, Co)
  Tensor forward_rows(const Tensor& x) const;
};

}  // namespace semocc
