#include <cmath>
#include <stdexcept>

#include "semocc/tensor.hpp"

namespace semocc {

namespace {

std::vector<double>& ensure_grad(Tensor::Node& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

int conv_out_len(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      double av = ad[static_cast<size_t>(i) * k + p];
      if (av == 0.0) continue;
      const double* brow = bd.data() + static_cast<size_t>(p) * n;
      double* orow = out.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return make_op_result({m, n}, std::move(out), {a, b}, [m, k, n](Tensor::Node& node) {
    auto& pa = *node.parents[0];
    auto& pb = *node.parents[1];
    if (pa.requires_grad) {  // dA = dOut * B^T
      auto& g = ensure_grad(pa);
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          double s = 0.0;
          const double* grow = node.grad.data() + static_cast<size_t>(i) * n;
          const double* brow = pb.data.data() + static_cast<size_t>(p) * n;
          for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
          g[static_cast<size_t>(i) * k + p] += s;
        }
    }
    if (pb.requires_grad) {  // dB = A^T * dOut
      auto& g = ensure_grad(pb);
      for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i) {
          double av = pa.data[static_cast<size_t>(i) * k + p];
          if (av == 0.0) continue;
          const double* grow = node.grad.data() + static_cast<size_t>(i) * n;
          double* grow_b = g.data() + static_cast<size_t>(p) * n;
          for (int j = 0; j < n; ++j) grow_b[j] += av * grow[j];
        }
    }
  });
}

Tensor conv1d(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.rank() != 2 || w.rank() != 3 || x.dim(0) != w.dim(1))
    throw std::invalid_argument("conv1d: incompatible shapes " + shape_str(x.shape()) +
                                " vs " + shape_str(w.shape()));
  const int ci = x.dim(0), L = x.dim(1);
  const int co = w.dim(0), kk = w.dim(2);
  if (pad < 0) pad = kk / 2;
  const int Lo = conv_out_len(L, kk, stride, pad);
  if (Lo <= 0) throw std::invalid_argument("conv1d: empty output for input length " + std::to_string(L));
  std::vector<double> out(static_cast<size_t>(co) * Lo, 0.0);
  const auto& xd = x.data();
  const auto& wd = w.data();
  for (int oc = 0; oc < co; ++oc)
    for (int t = 0; t < Lo; ++t) {
      double s = 0.0;
      for (int ic = 0; ic < ci; ++ic)
        for (int u = 0; u < kk; ++u) {
          int src = t * stride - pad + u;
          if (src < 0 || src >= L) continue;
          s += xd[static_cast<size_t>(ic) * L + src] *
               wd[(static_cast<size_t>(oc) * ci + ic) * kk + u];
        }
      out[static_cast<size_t>(oc) * Lo + t] = s;
    }
  return make_op_result({co, Lo}, std::move(out), {x, w},
                        [ci, L, co, kk, Lo, stride, pad](Tensor::Node& node) {
    auto& px = *node.parents[0];
    auto& pw = *node.parents[1];
    for (int oc = 0; oc < co; ++oc)
      for (int t = 0; t < Lo; ++t) {
        double go = node.grad[static_cast<size_t>(oc) * Lo + t];
        if (go == 0.0) continue;
        for (int ic = 0; ic < ci; ++ic)
          for (int u = 0; u < kk; ++u) {
            int src = t * stride - pad + u;
            if (src < 0 || src >= L) continue;
            size_t xi = static_cast<size_t>(ic) * L + src;
            size_t wi = (static_cast<size_t>(oc) * ci + ic) * kk + u;
            if (px.requires_grad) ensure_grad(px)[xi] += go * pw.data[wi];
            if (pw.requires_grad) ensure_grad(pw)[wi] += go * px.data[xi];
          }
      }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, int stride) {
  if (x.rank() != 3 || w.rank() != 4 || x.dim(0) != w.dim(1))
    throw std::invalid_argument("conv2d: incompatible shapes " + shape_str(x.shape()) +
                                " vs " + shape_str(w.shape()));
  if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
  const int ci = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int ph = kh / 2, pw_ = kw / 2;
  const int Ho = conv_out_len(H, kh, stride, ph), Wo = conv_out_len(W, kw, stride, pw_);
  std::vector<double> out(static_cast<size_t>(co) * Ho * Wo, 0.0);
  const auto& xd = x.data();
  const auto& wd = w.data();
  for (int oc = 0; oc < co; ++oc)
    for (int i = 0; i < Ho; ++i)
      for (int j = 0; j < Wo; ++j) {
        double s = 0.0;
        for (int ic = 0; ic < ci; ++ic) {
          const double* xplane = xd.data() + static_cast<size_t>(ic) * H * W;
          const double* wk = wd.data() + ((static_cast<size_t>(oc) * ci + ic) * kh) * kw;
          for (int u = 0; u < kh; ++u) {
            int si = i * stride - ph + u;
            if (si < 0 || si >= H) continue;
            for (int v = 0; v < kw; ++v) {
              int sj = j * stride - pw_ + v;
              if (sj < 0 || sj >= W) continue;
              s += xplane[static_cast<size_t>(si) * W + sj] * wk[static_cast<size_t>(u) * kw + v];
            }
          }
        }
        out[(static_cast<size_t>(oc) * Ho + i) * Wo + j] = s;
      }
  return make_op_result({co, Ho, Wo}, std::move(out), {x, w},
                        [ci, H, W, co, kh, kw, ph, pw_, Ho, Wo, stride](Tensor::Node& node) {
    auto& px = *node.parents[0];
    auto& pw = *node.parents[1];
    bool gx = px.requires_grad, gw = pw.requires_grad;
    if (gx) ensure_grad(px);
    if (gw) ensure_grad(pw);
    for (int oc = 0; oc < co; ++oc)
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j) {
          double go = node.grad[(static_cast<size_t>(oc) * Ho + i) * Wo + j];
          if (go == 0.0) continue;
          for (int ic = 0; ic < ci; ++ic)
            for (int u = 0; u < kh; ++u) {
              int si = i * stride - ph + u;
              if (si < 0 || si >= H) continue;
              for (int v = 0; v < kw; ++v) {
                int sj = j * stride - pw_ + v;
                if (sj < 0 || sj >= W) continue;
                size_t xi = (static_cast<size_t>(ic) * H + si) * W + sj;
                size_t wi = ((static_cast<size_t>(oc) * ci + ic) * kh + u) * kw + v;
                if (gx) px.grad[xi] += go * pw.data[wi];
                if (gw) pw.grad[wi] += go * px.data[xi];
              }
            }
        }
  });
}

Tensor conv3d(const Tensor& x, const Tensor& w, int stride) {
  if (x.rank() != 4 || w.rank() != 5 || x.dim(0) != w.dim(1))
    throw std::invalid_argument("conv3d: incompatible shapes " + shape_str(x.shape()) +
                                " vs " + shape_str(w.shape()));
  if (stride != 1 && stride != 2) throw std::invalid_argument("conv3d: stride must be 1 or 2");
  const int ci = x.dim(0), X = x.dim(1), Y = x.dim(2), Z = x.dim(3);
  const int co = w.dim(0), kx = w.dim(2), ky = w.dim(3), kz = w.dim(4);
  const int px_ = kx / 2, py = ky / 2, pz = kz / 2;
  const int Xo = conv_out_len(X, kx, stride, px_);
  const int Yo = conv_out_len(Y, ky, stride, py);
  const int Zo = conv_out_len(Z, kz, stride, pz);
  std::vector<double> out(static_cast<size_t>(co) * Xo * Yo * Zo, 0.0);
  const auto& xd = x.data();
  const auto& wd = w.data();
  for (int oc = 0; oc < co; ++oc)
    for (int i = 0; i < Xo; ++i)
      for (int j = 0; j < Yo; ++j)
        for (int l = 0; l < Zo; ++l) {
          double s = 0.0;
          for (int ic = 0; ic < ci; ++ic) {
            const double* xg = xd.data() + static_cast<size_t>(ic) * X * Y * Z;
            const double* wk = wd.data() + (((static_cast<size_t>(oc) * ci + ic) * kx) * ky) * kz;
            for (int u = 0; u < kx; ++u) {
              int si = i * stride - px_ + u;
              if (si < 0 || si >= X) continue;
              for (int v = 0; v < ky; ++v) {
                int sj = j * stride - py + v;
                if (sj < 0 || sj >= Y) continue;
                for (int q = 0; q < kz; ++q) {
                  int sl = l * stride - pz + q;
                  if (sl < 0 || sl >= Z) continue;
                  s += xg[(static_cast<size_t>(si) * Y + sj) * Z + sl] *
                       wk[(static_cast<size_t>(u) * ky + v) * kz + q];
                }
              }
            }
          }
          out[((static_cast<size_t>(oc) * Xo + i) * Yo + j) * Zo + l] = s;
        }
  return make_op_result({co, Xo, Yo, Zo}, std::move(out), {x, w},
                        [ci, X, Y, Z, co, kx, ky, kz, px_, py, pz, Xo, Yo, Zo, stride](Tensor::Node& node) {
    auto& pxn = *node.parents[0];
    auto& pwn = *node.parents[1];
    bool gx = pxn.requires_grad, gw = pwn.requires_grad;
    if (gx) ensure_grad(pxn);
    if (gw) ensure_grad(pwn);
    for (int oc = 0; oc < co; ++oc)
      for (int i = 0; i < Xo; ++i)
        for (int j = 0; j < Yo; ++j)
          for (int l = 0; l < Zo; ++l) {
            double go = node.grad[((static_cast<size_t>(oc) * Xo + i) * Yo + j) * Zo + l];
            if (go == 0.0) continue;
            for (int ic = 0; ic < ci; ++ic)
              for (int u = 0; u < kx; ++u) {
                int si = i * stride - px_ + u;
                if (si < 0 || si >= X) continue;
                for (int v = 0; v < ky; ++v) {
                  int sj = j * stride - py + v;
                  if (sj < 0 || sj >= Y) continue;
                  for (int q = 0; q < kz; ++q) {
                    int sl = l * stride - pz + q;
                    if (sl < 0 || sl >= Z) continue;
                    size_t xi = ((static_cast<size_t>(ic) * X + si) * Y + sj) * Z + sl;
                    size_t wi = (((static_cast<size_t>(oc) * ci + ic) * kx + u) * ky + v) * kz + q;
                    if (gx) pxn.grad[xi] += go * pwn.data[wi];
                    if (gw) pwn.grad[wi] += go * pxn.data[xi];
                  }
                }
              }
          }
  });
}

Tensor upsample2x_2d(const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("upsample2x_2d: expected (C,H,W), got " + shape_str(x.shape()));
  const int c = x.dim(0), H = x.dim(1), W = x.dim(2);
  std::vector<double> out(static_cast<size_t>(c) * 4 * H * W);
  const auto& xd = x.data();
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < 2 * H; ++i)
      for (int j = 0; j < 2 * W; ++j)
        out[(static_cast<size_t>(ch) * 2 * H + i) * 2 * W + j] =
            xd[(static_cast<size_t>(ch) * H + i / 2) * W + j / 2];
  return make_op_result({c, 2 * H, 2 * W}, std::move(out), {x}, [c, H, W](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < 2 * H; ++i)
        for (int j = 0; j < 2 * W; ++j)
          g[(static_cast<size_t>(ch) * H + i / 2) * W + j / 2] +=
              n.grad[(static_cast<size_t>(ch) * 2 * H + i) * 2 * W + j];
  });
}

Tensor upsample2x_3d(const Tensor& x) {
  if (x.rank() != 4) throw std::invalid_argument("upsample2x_3d: expected (C,X,Y,Z), got " + shape_str(x.shape()));
  const int c = x.dim(0), X = x.dim(1), Y = x.dim(2), Z = x.dim(3);
  std::vector<double> out(static_cast<size_t>(c) * 8 * X * Y * Z);
  const auto& xd = x.data();
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < 2 * X; ++i)
      for (int j = 0; j < 2 * Y; ++j)
        for (int l = 0; l < 2 * Z; ++l)
          out[((static_cast<size_t>(ch) * 2 * X + i) * 2 * Y + j) * 2 * Z + l] =
              xd[((static_cast<size_t>(ch) * X + i / 2) * Y + j / 2) * Z + l / 2];
  return make_op_result({c, 2 * X, 2 * Y, 2 * Z}, std::move(out), {x}, [c, X, Y, Z](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < 2 * X; ++i)
        for (int j = 0; j < 2 * Y; ++j)
          for (int l = 0; l < 2 * Z; ++l)
            g[((static_cast<size_t>(ch) * X + i / 2) * Y + j / 2) * Z + l / 2] +=
                n.grad[((static_cast<size_t>(ch) * 2 * X + i) * 2 * Y + j) * 2 * Z + l];
  });
}

Tensor pad3d(const Tensor& x, int nx, int ny, int nz) {
  if (x.rank() != 4) throw std::invalid_argument("pad3d: expected (C,X,Y,Z), got " + shape_str(x.shape()));
  const int c = x.dim(0), X = x.dim(1), Y = x.dim(2), Z = x.dim(3);
  if (nx < X || ny < Y || nz < Z)
    throw std::invalid_argument("pad3d: target smaller than input " + shape_str(x.shape()));
  std::vector<double> out(static_cast<size_t>(c) * nx * ny * nz, 0.0);
  const auto& xd = x.data();
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < X; ++i)
      for (int j = 0; j < Y; ++j)
        for (int l = 0; l < Z; ++l)
          out[((static_cast<size_t>(ch) * nx + i) * ny + j) * nz + l] =
              xd[((static_cast<size_t>(ch) * X + i) * Y + j) * Z + l];
  return make_op_result({c, nx, ny, nz}, std::move(out), {x}, [c, X, Y, Z, nx, ny, nz](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < X; ++i)
        for (int j = 0; j < Y; ++j)
          for (int l = 0; l < Z; ++l)
            g[((static_cast<size_t>(ch) * X + i) * Y + j) * Z + l] +=
                n.grad[((static_cast<size_t>(ch) * nx + i) * ny + j) * nz + l];
  });
}

Tensor crop3d(const Tensor& x, int nx, int ny, int nz) {
  if (x.rank() != 4) throw std::invalid_argument("crop3d: expected (C,X,Y,Z), got " + shape_str(x.shape()));
  const int c = x.dim(0), X = x.dim(1), Y = x.dim(2), Z = x.dim(3);
  if (nx > X || ny > Y || nz > Z)
    throw std::invalid_argument("crop3d: target larger than input " + shape_str(x.shape()));
  std::vector<double> out(static_cast<size_t>(c) * nx * ny * nz);
  const auto& xd = x.data();
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j)
        for (int l = 0; l < nz; ++l)
          out[((static_cast<size_t>(ch) * nx + i) * ny + j) * nz + l] =
              xd[((static_cast<size_t>(ch) * X + i) * Y + j) * Z + l];
  return make_op_result({c, nx, ny, nz}, std::move(out), {x}, [c, X, Y, Z, nx, ny, nz](Tensor::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    auto& g = ensure_grad(p);
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
          for (int l = 0; l < nz; ++l)
            g[((static_cast<size_t>(ch) * X + i) * Y + j) * Z + l] +=
                n.grad[((static_cast<size_t>(ch) * nx + i) * ny + j) * nz + l];
  });
}

}  // namespace semocc
