#pragma once

#include <vector>

#include "semocc/tensor.hpp"

namespace semocc {

// AdamW: moment-based update with decoupled weight decay.
class AdamW {
 public:
  struct Options {
    double learning_rate = 2e-4;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit AdamW(std::vector<Tensor> params) : AdamW(std::move(params), Options{}) {}
  AdamW(std::vector<Tensor> params, Options opts);

  // Applies one update from the accumulated grads, then clears them.
  // Throws if any parameter is missing its grad.
  void step();
  void zero_grad();

  int64_t step_count() const { return step_count_; }
  const Options& options() const { return opts_; }
  std::vector<Tensor>& params() { return params_; }

 private:
  std::vector<Tensor> params_;
  Options opts_;
  std::vector<std::vector<double>> m_, v_;
  int64_t step_count_ = 0;
};

}  // namespace semocc
