#include "semocc/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace semocc {

AdamW::AdamW(std::vector<Tensor> params, Options opts)
    : params_(std::move(params)), opts_(opts) {
  if (opts_.learning_rate <= 0.0) throw std::invalid_argument("AdamW: learning_rate must be positive");
  if (opts_.weight_decay < 0.0) throw std::invalid_argument("AdamW: weight_decay must be nonnegative");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void AdamW::step() {
  for (const auto& p : params_)
    if (!p.has_grad())
      throw std::runtime_error("AdamW: parameter with shape " + shape_str(p.shape()) +
                               " has no grad; run backward first");
  ++step_count_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_count_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    auto& w = params_[pi].data();
    const auto& g = params_[pi].grad();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (size_t i = 0; i < w.size(); ++i) {
      m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i];
      v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w[i] -= opts_.learning_rate * (mhat / (std::sqrt(vhat) + opts_.eps) +
                                     opts_.weight_decay * w[i]);
    }
  }
  zero_grad();
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace semocc
