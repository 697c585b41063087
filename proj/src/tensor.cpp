#include "semocc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace semocc {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

Tensor make_op_result(std::vector<int> shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      std::function<void(Tensor::Node&)> backward_fn) {
  auto n = std::make_shared<Tensor::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  n->requires_grad = rg;
  if (rg) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  int64_t n = shape_numel(shape);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data.assign(static_cast<size_t>(n), 0.0);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("from_data: buffer length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item: tensor has " + std::to_string(size()) + " elements, expected 1");
  return node_->data[0];
}

std::vector<double>& Tensor::grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::backward() const {
  if (size() != 1) throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(shape()));
  // iterative topological order over the tape
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame { Node* n; size_t next_parent; };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent == 0 && visited.count(f.n)) { stack.pop_back(); continue; }
    if (f.next_parent < f.n->parents.size()) {
      Node* p = f.n->parents[f.next_parent++].get();
      if (!visited.count(p) && p->requires_grad) stack.push_back({p, 0});
    } else {
      if (!visited.count(f.n)) { visited.insert(f.n); order.push_back(f.n); }
      stack.pop_back();
    }
  }
  node_->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
  // free the tape; leaf gradients stay in place
  for (Node* n : order) {
    n->backward_fn = nullptr;
    n->parents.clear();
  }
}

namespace {

std::vector<double>& ensure_grad(Tensor::Node& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *n.parents[k];
      if (!p.requires_grad) continue;
      auto& g = ensure_grad(p);
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
    if (n.parents[0]->requires_grad) {
      auto& g = ensure_grad(*n.parents[0]);
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (n.parents[1]->requires_grad) {
      auto& g = ensure_grad(*n.parents[1]);
      for (size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) {
      auto& g = ensure_grad(pa);
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = ensure_grad(pb);
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pa.data[i];
    }
  });
}

Tensor divide(const Tensor& a, const Tensor& b) {
  check_same_shape("divide", a, b);
  std::vector<double> out(a.data());
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] /= bd[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) {
      auto& g = ensure_grad(pa);
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = ensure_grad(pb);
      for (size_t i = 0; i < g.size(); ++i)
        g[i] -= n.grad[i] * pa.data[i] / (pb.data[i] * pb.data[i]);
    }
  });
}

Tensor scale(const Tensor& x, double c) { return affine(x, c, 0.0); }

Tensor affine(const Tensor& x, double a, double b) {
  std::vector<double> out(x.data());
  for (auto& v : out) v = a * v + b;
  return make_op_result(x.shape(), std::move(out), {x}, [a](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (size_t i = 0; i < g.size(); ++i) g[i] += a * n.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.data());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_op_result(x.shape(), std::move(out), {x}, [](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (size_t i = 0; i < g.size(); ++i)
      if (p.data[i] > 0.0) g[i] += n.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.data());
  for (auto& v : out) v = 1.0 / (1.0 + std::exp(-v));
  return make_op_result(x.shape(), std::move(out), {x}, [](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (size_t i = 0; i < g.size(); ++i) {
      double s = n.data[i];
      g[i] += n.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor log_elem(const Tensor& x) {
  std::vector<double> out(x.data());
  for (auto& v : out) v = std::log(v);
  return make_op_result(x.shape(), std::move(out), {x}, [](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / p.data[i];
  });
}

namespace {

// Iterates an axis as (outer, axis_len, inner) strides.
struct AxisIter {
  int64_t outer, len, inner;
};

AxisIter axis_iter(const std::vector<int>& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape));
  AxisIter it{1, shape[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) it.outer *= shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) it.inner *= shape[i];
  return it;
}

}  // namespace

Tensor softmax_axis(const Tensor& x, int axis) {
  AxisIter it = axis_iter(x.shape(), axis);
  std::vector<double> out(x.data().size());
  const auto& xd = x.data();
  for (int64_t o = 0; o < it.outer; ++o) {
    for (int64_t in = 0; in < it.inner; ++in) {
      int64_t base = o * it.len * it.inner + in;
      double mx = xd[static_cast<size_t>(base)];
      for (int64_t k = 1; k < it.len; ++k)
        mx = std::max(mx, xd[static_cast<size_t>(base + k * it.inner)]);
      double z = 0.0;
      for (int64_t k = 0; k < it.len; ++k) {
        double e = std::exp(xd[static_cast<size_t>(base + k * it.inner)] - mx);
        out[static_cast<size_t>(base + k * it.inner)] = e;
        z += e;
      }
      for (int64_t k = 0; k < it.len; ++k) out[static_cast<size_t>(base + k * it.inner)] /= z;
    }
  }
  return make_op_result(x.shape(), std::move(out), {x}, [it](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (int64_t o = 0; o < it.outer; ++o) {
      for (int64_t in = 0; in < it.inner; ++in) {
        int64_t base = o * it.len * it.inner + in;
        double dot = 0.0;
        for (int64_t k = 0; k < it.len; ++k) {
          size_t i = static_cast<size_t>(base + k * it.inner);
          dot += n.grad[i] * n.data[i];
        }
        for (int64_t k = 0; k < it.len; ++k) {
          size_t i = static_cast<size_t>(base + k * it.inner);
          g[i] += n.data[i] * (n.grad[i] - dot);
        }
      }
    }
  });
}

Tensor log_softmax_axis(const Tensor& x, int axis) {
  AxisIter it = axis_iter(x.shape(), axis);
  std::vector<double> out(x.data().size());
  const auto& xd = x.data();
  for (int64_t o = 0; o < it.outer; ++o) {
    for (int64_t in = 0; in < it.inner; ++in) {
      int64_t base = o * it.len * it.inner + in;
      double mx = xd[static_cast<size_t>(base)];
      for (int64_t k = 1; k < it.len; ++k)
        mx = std::max(mx, xd[static_cast<size_t>(base + k * it.inner)]);
      double z = 0.0;
      for (int64_t k = 0; k < it.len; ++k)
        z += std::exp(xd[static_cast<size_t>(base + k * it.inner)] - mx);
      double lz = mx + std::log(z);
      for (int64_t k = 0; k < it.len; ++k) {
        size_t i = static_cast<size_t>(base + k * it.inner);
        out[i] = xd[i] - lz;
      }
    }
  }
  return make_op_result(x.shape(), std::move(out), {x}, [it](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (int64_t o = 0; o < it.outer; ++o) {
      for (int64_t in = 0; in < it.inner; ++in) {
        int64_t base = o * it.len * it.inner + in;
        double gsum = 0.0;
        for (int64_t k = 0; k < it.len; ++k)
          gsum += n.grad[static_cast<size_t>(base + k * it.inner)];
        for (int64_t k = 0; k < it.len; ++k) {
          size_t i = static_cast<size_t>(base + k * it.inner);
          g[i] += n.grad[i] - std::exp(n.data[i]) * gsum;
        }
      }
    }
  });
}

Tensor sum_axis(const Tensor& x, int axis) {
  AxisIter it = axis_iter(x.shape(), axis);
  std::vector<int> out_shape;
  for (int i = 0; i < x.rank(); ++i)
    if (i != axis) out_shape.push_back(x.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<double> out(static_cast<size_t>(it.outer * it.inner), 0.0);
  const auto& xd = x.data();
  for (int64_t o = 0; o < it.outer; ++o)
    for (int64_t k = 0; k < it.len; ++k)
      for (int64_t in = 0; in < it.inner; ++in)
        out[static_cast<size_t>(o * it.inner + in)] +=
            xd[static_cast<size_t>((o * it.len + k) * it.inner + in)];
  return make_op_result(std::move(out_shape), std::move(out), {x}, [it](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (int64_t o = 0; o < it.outer; ++o)
      for (int64_t k = 0; k < it.len; ++k)
        for (int64_t in = 0; in < it.inner; ++in)
          g[static_cast<size_t>((o * it.len + k) * it.inner + in)] +=
              n.grad[static_cast<size_t>(o * it.inner + in)];
  });
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_op_result({1}, {s}, {x}, [](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (auto& v : g) v += n.grad[0];
  });
}

Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
  if (shape_numel(new_shape) != x.size())
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(new_shape));
  std::vector<double> out(x.data());
  return make_op_result(std::move(new_shape), std::move(out), {x}, [](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

}  // namespace semocc
