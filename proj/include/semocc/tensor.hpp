#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "semocc/rng.hpp"

namespace semocc {

// Reverse-mode autodiff tensor: dense row-major f64 buffer plus an optional
// gradient tape. The tape is dynamic (built per forward pass) and freed by
// backward(). No broadcasting anywhere: every op takes explicit shapes and
// rejects mismatches with both shapes in the message.
class Tensor {
 public:
  struct Node {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated lazily, same length as data
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // pulls node.grad into parents
  };

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor randn(std::vector<int> shape, Rng& rng, double stddev,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int dim(int axis) const { return node_->shape[static_cast<size_t>(axis)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t size() const { return static_cast<int64_t>(node_->data.size()); }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  double at(int64_t flat) const { return node_->data[static_cast<size_t>(flat)]; }
  double item() const;  // value of a one-element tensor

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::vector<double>& grad();
  const std::vector<double>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  // Runs reverse-mode accumulation from a scalar, then frees the tape
  // (parent links and closures). Leaf grads survive.
  void backward() const;

  std::shared_ptr<Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_op_result(std::vector<int> shape, std::vector<double> data,
                               std::vector<Tensor> parents,
                               std::function<void(Tensor::Node&)> backward_fn);
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);
void check_same_shape(const char* op, const Tensor& a, const Tensor& b);

// internal helper shared by op implementations
Tensor make_op_result(std::vector<int> shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      std::function<void(Tensor::Node&)> backward_fn);

// ---- elementwise / reduction ops ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor affine(const Tensor& x, double a, double b);  // a*x + b
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log_elem(const Tensor& x);
Tensor softmax_axis(const Tensor& x, int axis);
Tensor log_softmax_axis(const Tensor& x, int axis);
Tensor sum_axis(const Tensor& x, int axis);
Tensor sum_all(const Tensor& x);  // -> shape {1}

// ---- shape ops ----
Tensor reshape(const Tensor& x, std::vector<int> new_shape);
Tensor permute(const Tensor& x, std::vector<int> axes);
Tensor transpose2d(const Tensor& x);
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor slice(const Tensor& x, int axis, int start, int len);

// ---- linear algebra / convolution ----
Tensor matmul(const Tensor& a, const Tensor& b);  // (m,k)x(k,n)
// channel-first convs with zero padding kernel/2; stride 1 or 2
Tensor conv1d(const Tensor& x, const Tensor& w, int stride = 1, int pad = -1);
Tensor conv2d(const Tensor& x, const Tensor& w, int stride = 1);
Tensor conv3d(const Tensor& x, const Tensor& w, int stride = 1);
Tensor upsample2x_2d(const Tensor& x);
Tensor upsample2x_3d(const Tensor& x);
Tensor pad3d(const Tensor& x, int nx, int ny, int nz);   // zero-extend (C,X,Y,Z)
Tensor crop3d(const Tensor& x, int nx, int ny, int nz);  // keep leading block

// ---- indexed ops ----
// out[i] = x.flat[idx[i]]; gradient scatters back (adjoint of scatter_add)
Tensor gather(const Tensor& x, const std::vector<int64_t>& idx,
              std::vector<int> out_shape);
// out.flat[idx[i]] += src.flat[i] over a fresh zero tensor of out_shape
Tensor scatter_add(const Tensor& src, const std::vector<int64_t>& idx,
                   std::vector<int> out_shape);
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

// Diagonal input-gated linear recurrence over a sequence:
//   h_t = a_t*h_{t-1} + b_t*x_t,  y_t = c_t*h_t,  h_0 = 0
// All arguments (L,C); gates are taken as-is (decay parameterization, e.g.
// sigmoid, happens upstream).
Tensor selective_scan(const Tensor& x, const Tensor& a, const Tensor& b,
                      const Tensor& c);

// Per-channel product of two axis-aligned planes broadcast into a 3D grid.
//   ShareZ: A(C,H,Z), B(C,W,Z) -> out(C,H,W,Z) = A[c,h,z]*B[c,w,z]
//   ShareY: A(C,H,W), B(C,W,Z) -> out(C,H,W,Z) = A[c,h,w]*B[c,w,z]
enum class PlaneShare { kZ, kY };
Tensor plane_product(const Tensor& a, const Tensor& b, PlaneShare mode);

}  // namespace semocc
