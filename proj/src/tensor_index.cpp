#include <stdexcept>

#include "semocc/tensor.hpp"

namespace semocc {

namespace {

std::vector<double>& ensure_grad(Tensor::Node& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

std::vector<int64_t> strides_of(const std::vector<int>& shape) {
  std::vector<int64_t> st(shape.size());
  int64_t s = 1;
  for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
    st[static_cast<size_t>(i)] = s;
    s *= shape[static_cast<size_t>(i)];
  }
  return st;
}

}  // namespace

Tensor permute(const Tensor& x, std::vector<int> axes) {
  const int r = x.rank();
  if (static_cast<int>(axes.size()) != r)
    throw std::invalid_argument("permute: axes rank mismatch for shape " + shape_str(x.shape()));
  std::vector<bool> seen(static_cast<size_t>(r), false);
  std::vector<int> out_shape(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) {
    int a = axes[static_cast<size_t>(i)];
    if (a < 0 || a >= r || seen[static_cast<size_t>(a)])
      throw std::invalid_argument("permute: invalid axes for shape " + shape_str(x.shape()));
    seen[static_cast<size_t>(a)] = true;
    out_shape[static_cast<size_t>(i)] = x.dim(a);
  }
  auto in_st = strides_of(x.shape());
  auto out_st = strides_of(out_shape);
  const int64_t n = x.size();
  // source flat index for each destination flat index
  std::vector<int64_t> src_of(static_cast<size_t>(n));
  std::vector<int> coord(static_cast<size_t>(r), 0);
  for (int64_t dst = 0; dst < n; ++dst) {
    int64_t rem = dst, src = 0;
    for (int i = 0; i < r; ++i) {
      int64_t c = rem / out_st[static_cast<size_t>(i)];
      rem -= c * out_st[static_cast<size_t>(i)];
      src += c * in_st[static_cast<size_t>(axes[static_cast<size_t>(i)])];
    }
    src_of[static_cast<size_t>(dst)] = src;
  }
  std::vector<double> out(static_cast<size_t>(n));
  const auto& xd = x.data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = xd[static_cast<size_t>(src_of[static_cast<size_t>(i)])];
  return make_op_result(std::move(out_shape), std::move(out), {x},
                        [src_of = std::move(src_of)](Tensor::Node& nd) {
    auto& p = *nd.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (size_t i = 0; i < src_of.size(); ++i) g[static_cast<size_t>(src_of[i])] += nd.grad[i];
  });
}

Tensor transpose2d(const Tensor& x) {
  if (x.rank() != 2) throw std::invalid_argument("transpose2d: expected rank 2, got " + shape_str(x.shape()));
  return permute(x, {1, 0});
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const int r = xs[0].rank();
  if (axis < 0 || axis >= r) throw std::invalid_argument("concat: bad axis");
  int total = 0;
  for (const auto& t : xs) {
    if (t.rank() != r) throw std::invalid_argument("concat: rank mismatch");
    for (int i = 0; i < r; ++i)
      if (i != axis && t.dim(i) != xs[0].dim(i))
        throw std::invalid_argument("concat: shape mismatch " + shape_str(t.shape()) +
                                    " vs " + shape_str(xs[0].shape()));
    total += t.dim(axis);
  }
  std::vector<int> out_shape = xs[0].shape();
  out_shape[static_cast<size_t>(axis)] = total;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= xs[0].dim(i);
  for (int i = axis + 1; i < r; ++i) inner *= xs[0].dim(i);
  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  std::vector<int> lens;
  int64_t off = 0;
  for (const auto& t : xs) {
    const int len = t.dim(axis);
    lens.push_back(len);
    const auto& td = t.data();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t k = 0; k < len * inner; ++k)
        out[static_cast<size_t>((o * total + off) * inner + k)] =
            td[static_cast<size_t>(o * len * inner + k)];
    off += len;
  }
  return make_op_result(std::move(out_shape), std::move(out), xs,
                        [outer, inner, total, lens](Tensor::Node& nd) {
    int64_t off2 = 0;
    for (size_t pi = 0; pi < nd.parents.size(); ++pi) {
      auto& p = *nd.parents[pi];
      const int len = lens[pi];
      if (p.requires_grad) {
        auto& g = ensure_grad(p);
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t k = 0; k < len * inner; ++k)
            g[static_cast<size_t>(o * len * inner + k)] +=
                nd.grad[static_cast<size_t>((o * total + off2) * inner + k)];
      }
      off2 += len;
    }
  });
}

Tensor slice(const Tensor& x, int axis, int start, int len) {
  const int r = x.rank();
  if (axis < 0 || axis >= r) throw std::invalid_argument("slice: bad axis");
  if (start < 0 || len <= 0 || start + len > x.dim(axis))
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") out of bounds for " +
                                shape_str(x.shape()));
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < r; ++i) inner *= x.dim(i);
  const int alen = x.dim(axis);
  std::vector<int> out_shape = x.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  std::vector<double> out(static_cast<size_t>(outer * len * inner));
  const auto& xd = x.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t k = 0; k < len * inner; ++k)
      out[static_cast<size_t>(o * len * inner + k)] =
          xd[static_cast<size_t>((o * alen + start) * inner + k)];
  return make_op_result(std::move(out_shape), std::move(out), {x},
                        [outer, inner, alen, start, len](Tensor::Node& nd) {
    auto& p = *nd.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t k = 0; k < len * inner; ++k)
        g[static_cast<size_t>((o * alen + start) * inner + k)] +=
            nd.grad[static_cast<size_t>(o * len * inner + k)];
  });
}

Tensor gather(const Tensor& x, const std::vector<int64_t>& idx, std::vector<int> out_shape) {
  if (shape_numel(out_shape) != static_cast<int64_t>(idx.size()))
    throw std::invalid_argument("gather: index count does not match out shape " + shape_str(out_shape));
  const int64_t n = x.size();
  std::vector<double> out(idx.size());
  const auto& xd = x.data();
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n)
      throw std::invalid_argument("gather: index " + std::to_string(idx[i]) +
                                  " out of range [0," + std::to_string(n) + ")");
    out[i] = xd[static_cast<size_t>(idx[i])];
  }
  return make_op_result(std::move(out_shape), std::move(out), {x}, [idx](Tensor::Node& nd) {
    auto& p = *nd.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (size_t i = 0; i < idx.size(); ++i) g[static_cast<size_t>(idx[i])] += nd.grad[i];
  });
}

Tensor scatter_add(const Tensor& src, const std::vector<int64_t>& idx, std::vector<int> out_shape) {
  if (static_cast<int64_t>(idx.size()) != src.size())
    throw std::invalid_argument("scatter_add: index count " + std::to_string(idx.size()) +
                                " does not match source size " + std::to_string(src.size()));
  const int64_t n = shape_numel(out_shape);
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  const auto& sd = src.data();
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n)
      throw std::invalid_argument("scatter_add: index " + std::to_string(idx[i]) +
                                  " out of range [0," + std::to_string(n) + ")");
    out[static_cast<size_t>(idx[i])] += sd[i];
  }
  return make_op_result(std::move(out_shape), std::move(out), {src}, [idx](Tensor::Node& nd) {
    auto& p = *nd.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (size_t i = 0; i < idx.size(); ++i) g[i] += nd.grad[static_cast<size_t>(idx[i])];
  });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2)
    throw std::invalid_argument("embedding_lookup: table must be 2D, got " + shape_str(table.shape()));
  const int rows = table.dim(0), c = table.dim(1);
  std::vector<int64_t> idx;
  idx.reserve(ids.size() * static_cast<size_t>(c));
  for (int id : ids) {
    if (id < 0 || id >= rows)
      throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                  " out of range [0," + std::to_string(rows) + ")");
    for (int j = 0; j < c; ++j) idx.push_back(static_cast<int64_t>(id) * c + j);
  }
  return gather(table, idx, {static_cast<int>(ids.size()), c});
}

Tensor selective_scan(const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c) {
  check_same_shape("selective_scan", x, a);
  check_same_shape("selective_scan", x, b);
  check_same_shape("selective_scan", x, c);
  if (x.rank() != 2)
    throw std::invalid_argument("selective_scan: expected (L,C), got " + shape_str(x.shape()));
  const int L = x.dim(0), C = x.dim(1);
  const auto& xd = x.data();
  const auto& ad = a.data();
  const auto& bd = b.data();
  const auto& cd = c.data();
  std::vector<double> h(static_cast<size_t>(L) * C);  // kept for backward
  std::vector<double> y(static_cast<size_t>(L) * C);
  for (int ch = 0; ch < C; ++ch) {
    double hprev = 0.0;
    for (int t = 0; t < L; ++t) {
      size_t i = static_cast<size_t>(t) * C + ch;
      double ht = ad[i] * hprev + bd[i] * xd[i];
      h[i] = ht;
      y[i] = cd[i] * ht;
      hprev = ht;
    }
  }
  return make_op_result({L, C}, std::move(y), {x, a, b, c},
                        [L, C, h = std::move(h)](Tensor::Node& nd) {
    auto& px = *nd.parents[0];
    auto& pa = *nd.parents[1];
    auto& pb = *nd.parents[2];
    auto& pc = *nd.parents[3];
    bool gx = px.requires_grad, ga = pa.requires_grad;
    bool gb = pb.requires_grad, gc = pc.requires_grad;
    if (gx) ensure_grad(px);
    if (ga) ensure_grad(pa);
    if (gb) ensure_grad(pb);
    if (gc) ensure_grad(pc);
    // backprop through time, per channel
    for (int ch = 0; ch < C; ++ch) {
      double dh = 0.0;
      for (int t = L - 1; t >= 0; --t) {
        size_t i = static_cast<size_t>(t) * C + ch;
        double hprev = t > 0 ? h[i - static_cast<size_t>(C)] : 0.0;
        if (gc) pc.grad[i] += nd.grad[i] * h[i];
        dh += nd.grad[i] * pc.data[i];
        if (ga) pa.grad[i] += dh * hprev;
        if (gb) pb.grad[i] += dh * px.data[i];
        if (gx) px.grad[i] += dh * pb.data[i];
        dh *= pa.data[i];
      }
    }
  });
}

Tensor plane_product(const Tensor& a, const Tensor& b, PlaneShare mode) {
  if (a.rank() != 3 || b.rank() != 3)
    throw std::invalid_argument("plane_product: expected two rank-3 planes, got " +
                                shape_str(a.shape()) + " and " + shape_str(b.shape()));
  if (a.dim(0) != b.dim(0))
    throw std::invalid_argument("plane_product: channel mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  const int C = a.dim(0);
  int H, W, Z;
  if (mode == PlaneShare::kZ) {
    // A(C,H,Z), B(C,W,Z): shared z axis
    H = a.dim(1); Z = a.dim(2); W = b.dim(1);
    if (b.dim(2) != Z)
      throw std::invalid_argument("plane_product: shared axis mismatch " + shape_str(a.shape()) +
                                  " vs " + shape_str(b.shape()));
  } else {
    // A(C,H,W), B(C,W,Z): shared y axis
    H = a.dim(1); W = a.dim(2); Z = b.dim(2);
    if (b.dim(1) != W)
      throw std::invalid_argument("plane_product: shared axis mismatch " + shape_str(a.shape()) +
                                  " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<size_t>(C) * H * W * Z);
  const auto& adt = a.data();
  const auto& bdt = b.data();
  for (int ch = 0; ch < C; ++ch)
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w)
        for (int z = 0; z < Z; ++z) {
          double av = (mode == PlaneShare::kZ)
                          ? adt[(static_cast<size_t>(ch) * H + h) * Z + z]
                          : adt[(static_cast<size_t>(ch) * H + h) * W + w];
          double bv = bdt[(static_cast<size_t>(ch) * W + w) * Z + z];
          out[((static_cast<size_t>(ch) * H + h) * W + w) * Z + z] = av * bv;
        }
  return make_op_result({C, H, W, Z}, std::move(out), {a, b}, [C, H, W, Z, mode](Tensor::Node& nd) {
    auto& pa = *nd.parents[0];
    auto& pb = *nd.parents[1];
    bool ga = pa.requires_grad, gb = pb.requires_grad;
    if (ga) ensure_grad(pa);
    if (gb) ensure_grad(pb);
    for (int ch = 0; ch < C; ++ch)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
          for (int z = 0; z < Z; ++z) {
            double go = nd.grad[((static_cast<size_t>(ch) * H + h) * W + w) * Z + z];
            if (go == 0.0) continue;
            size_t ai = (mode == PlaneShare::kZ)
                            ? (static_cast<size_t>(ch) * H + h) * Z + z
                            : (static_cast<size_t>(ch) * H + h) * W + w;
            size_t bi = (static_cast<size_t>(ch) * W + w) * Z + z;
            if (ga) pa.grad[ai] += go * pb.data[bi];
            if (gb) pb.grad[bi] += go * pa.data[ai];
          }
  });
}

}  // namespace semocc
