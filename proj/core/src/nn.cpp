#include "dndx/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dndx::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

// Unfolds one batch item into a (c * k * k) x (oh * ow) matrix.
void im2col(const float* x, int c, int h, int w, ConvGeometry g, int oh, int ow, float* col) {
  const int k = g.kernel;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + ((ch * k + ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            row[oy * ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? x[(ch * h + iy) * w + ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int c, int h, int w, ConvGeometry g, int oh, int ow, float* x) {
  const int k = g.kernel;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + ((ch * k + ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < w) x[(ch * h + iy) * w + ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

// C(m x n) += A(m x k) * B(k x n)
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const float av = a[static_cast<std::size_t>(i) * k + p];
      if (av == 0.0f) continue;
      const float* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m x n) += A(m x k) * B(n x k)^T
void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const float* brow = b + static_cast<std::size_t>(j) * k;
      float acc = 0.0f;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[static_cast<std::size_t>(i) * n + j] += acc;
    }
  }
}

// C(m x n) += A(k x m)^T * B(k x n)
void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c) {
  for (int p = 0; p < k; ++p) {
    const float* arow = a + static_cast<std::size_t>(p) * m;
    const float* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const float av = arow[i];
      if (av == 0.0f) continue;
      float* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

int window_output(int in, int kernel, int stride, int padding) {
  const int span = in + 2 * padding - kernel;
  const int q = span >= 0 ? span / stride : -((-span + stride - 1) / stride);
  return q + 1;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& weights, const Tensor& bias, ConvGeometry g) {
  const Dims xd = x.dims();
  const Dims wd = weights.dims();
  require(wd.c == xd.c && wd.h == g.kernel && wd.w == g.kernel,
          "conv2d: weights " + wd.str() + " do not match input " + xd.str());
  require(bias.size() == static_cast<std::size_t>(wd.n), "conv2d: bias length mismatch");
  const int oh = window_output(xd.h, g.kernel, g.stride, g.padding);
  const int ow = window_output(xd.w, g.kernel, g.stride, g.padding);
  require(oh >= 1 && ow >= 1, "conv2d: output would be empty");

  const int filters = wd.n;
  const int kdim = xd.c * g.kernel * g.kernel;
  const int pixels = oh * ow;
  Tensor y(Dims{xd.n, filters, oh, ow});
  std::vector<float> col(static_cast<std::size_t>(kdim) * pixels);
  for (int n = 0; n < xd.n; ++n) {
    im2col(x.item(n).data(), xd.c, xd.h, xd.w, g, oh, ow, col.data());
    float* out = y.item(n).data();
    for (int f = 0; f < filters; ++f) std::fill(out + f * pixels, out + (f + 1) * pixels, bias[f]);
    gemm_nn(filters, pixels, kdim, weights.data(), col.data(), out);
  }
  return y;
}

ConvGrads conv2d_backward(const Tensor& x, const Tensor& weights, const Tensor& dy, ConvGeometry g) {
  const Dims xd = x.dims();
  const Dims wd = weights.dims();
  const int oh = window_output(xd.h, g.kernel, g.stride, g.padding);
  const int ow = window_output(xd.w, g.kernel, g.stride, g.padding);
  require(dy.dims() == (Dims{xd.n, wd.n, oh, ow}), "conv2d_backward: upstream gradient " +
                                                       dy.dims().str() + " does not match output");
  const int filters = wd.n;
  const int kdim = xd.c * g.kernel * g.kernel;
  const int pixels = oh * ow;

  ConvGrads grads{Tensor(xd), Tensor(wd), Tensor(Dims{filters, 1, 1, 1})};
  std::vector<float> col(static_cast<std::size_t>(kdim) * pixels);
  std::vector<float> dcol(col.size());
  for (int n = 0; n < xd.n; ++n) {
    const float* dyn = dy.item(n).data();
    im2col(x.item(n).data(), xd.c, xd.h, xd.w, g, oh, ow, col.data());
    gemm_nt(filters, kdim, pixels, dyn, col.data(), grads.dweights.data());
    for (int f = 0; f < filters; ++f) {
      float acc = 0.0f;
      for (int p = 0; p < pixels; ++p) acc += dyn[f * pixels + p];
      grads.dbias[f] += acc;
    }
    std::fill(dcol.begin(), dcol.end(), 0.0f);
    gemm_tn(kdim, pixels, filters, weights.data(), dyn, dcol.data());
    col2im(dcol.data(), xd.c, xd.h, xd.w, g, oh, ow, grads.dx.item(n).data());
  }
  return grads;
}

MaxPoolOutput maxpool_forward(const Tensor& x, PoolGeometry g) {
  const Dims xd = x.dims();
  const int oh = window_output(xd.h, g.kernel, g.stride, 0);
  const int ow = window_output(xd.w, g.kernel, g.stride, 0);
  require(oh >= 1 && ow >= 1, "maxpool: output would be empty");
  MaxPoolOutput out{Tensor(Dims{xd.n, xd.c, oh, ow}), {}};
  out.argmax.resize(out.y.size());
  std::size_t o = 0;
  for (int n = 0; n < xd.n; ++n)
    for (int c = 0; c < xd.c; ++c)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++o) {
          const std::size_t base = (static_cast<std::size_t>(n) * xd.c + c) * xd.h * xd.w;
          std::size_t best = base + static_cast<std::size_t>(oy * g.stride) * xd.w + ox * g.stride;
          float best_v = x[best];
          for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) {
              const std::size_t i =
                  base + static_cast<std::size_t>(oy * g.stride + ky) * xd.w + (ox * g.stride + kx);
              if (x[i] > best_v) {
                best_v = x[i];
                best = i;
              }
            }
          out.y[o] = best_v;
          out.argmax[o] = static_cast<std::uint32_t>(best);
        }
  return out;
}

Tensor maxpool_backward(const Tensor& dy, std::span<const std::uint32_t> argmax, Dims x_dims) {
  require(argmax.size() == dy.size(), "maxpool_backward: argmax length mismatch");
  Tensor dx(x_dims);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
  return dx;
}

Tensor avgpool_forward(const Tensor& x, PoolGeometry g) {
  const Dims xd = x.dims();
  const int oh = window_output(xd.h, g.kernel, g.stride, 0);
  const int ow = window_output(xd.w, g.kernel, g.stride, 0);
  require(oh >= 1 && ow >= 1, "avgpool: output would be empty");
  Tensor y(Dims{xd.n, xd.c, oh, ow});
  const float scale = 1.0f / static_cast<float>(g.kernel * g.kernel);
  for (int n = 0; n < xd.n; ++n)
    for (int c = 0; c < xd.c; ++c)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          float acc = 0.0f;
          for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) acc += x.at(n, c, oy * g.stride + ky, ox * g.stride + kx);
          y.at(n, c, oy, ox) = acc * scale;
        }
  return y;
}

Tensor avgpool_backward(const Tensor& dy, Dims x_dims, PoolGeometry g) {
  const Dims yd = dy.dims();
  Tensor dx(x_dims);
  const float scale = 1.0f / static_cast<float>(g.kernel * g.kernel);
  for (int n = 0; n < yd.n; ++n)
    for (int c = 0; c < yd.c; ++c)
      for (int oy = 0; oy < yd.h; ++oy)
        for (int ox = 0; ox < yd.w; ++ox) {
          const float v = dy.at(n, c, oy, ox) * scale;
          for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) dx.at(n, c, oy * g.stride + ky, ox * g.stride + kx) += v;
        }
  return dx;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0.0f ? v : 0.0f;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  require(x.dims() == dy.dims(), "relu_backward: shape mismatch");
  Tensor dx(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
  return dx;
}

Tensor fc_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  const int n = x.dims().n;
  const int in = static_cast<int>(x.dims().per_item());
  const int units = weights.dims().n;
  require(static_cast<int>(weights.dims().per_item()) == in,
          "fc: weights " + weights.dims().str() + " do not match input " + x.dims().str());
  require(bias.size() == static_cast<std::size_t>(units), "fc: bias length mismatch");
  Tensor y(Dims{n, units, 1, 1});
  for (int b = 0; b < n; ++b) {
    const float* xr = x.item(b).data();
    float* yr = y.item(b).data();
    for (int u = 0; u < units; ++u) {
      const float* wr = weights.data() + static_cast<std::size_t>(u) * in;
      float acc = 0.0f;
      for (int i = 0; i < in; ++i) acc += wr[i] * xr[i];
      yr[u] = acc + bias[u];
    }
  }
  return y;
}

FcGrads fc_backward(const Tensor& x, const Tensor& weights, const Tensor& dy) {
  const int n = x.dims().n;
  const int in = static_cast<int>(x.dims().per_item());
  const int units = weights.dims().n;
  require(dy.dims() == (Dims{n, units, 1, 1}), "fc_backward: upstream gradient shape mismatch");
  FcGrads grads{Tensor(x.dims()), Tensor(weights.dims()), Tensor(Dims{units, 1, 1, 1})};
  for (int b = 0; b < n; ++b) {
    const float* xr = x.item(b).data();
    const float* dyr = dy.item(b).data();
    float* dxr = grads.dx.item(b).data();
    for (int u = 0; u < units; ++u) {
      const float g = dyr[u];
      grads.dbias[u] += g;
      if (g == 0.0f) continue;
      const float* wr = weights.data() + static_cast<std::size_t>(u) * in;
      float* dwr = grads.dweights.data() + static_cast<std::size_t>(u) * in;
      for (int i = 0; i < in; ++i) {
        dwr[i] += g * xr[i];
        dxr[i] += g * wr[i];
      }
    }
  }
  return grads;
}

Tensor softmax(const Tensor& logits) {
  const int n = logits.dims().n;
  const int k = static_cast<int>(logits.dims().per_item());
  Tensor p(logits.dims());
  for (int b = 0; b < n; ++b) {
    const float* z = logits.item(b).data();
    float* pr = p.item(b).data();
    const float zmax = *std::max_element(z, z + k);
    double total = 0.0;
    for (int j = 0; j < k; ++j) total += std::exp(static_cast<double>(z[j] - zmax));
    for (int j = 0; j < k; ++j) pr[j] = static_cast<float>(std::exp(static_cast<double>(z[j] - zmax)) / total);
  }
  return p;
}

LossOutput softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const int n = logits.dims().n;
  const int k = static_cast<int>(logits.dims().per_item());
  require(labels.size() == static_cast<std::size_t>(n), "softmax_cross_entropy: label count mismatch");
  LossOutput out{0.0, Tensor(logits.dims())};
  for (int b = 0; b < n; ++b) {
    const int label = labels[b];
    require(label >= 0 && label < k, "softmax_cross_entropy: label out of range");
    const float* z = logits.item(b).data();
    float* dz = out.dlogits.item(b).data();
    const double zmax = *std::max_element(z, z + k);
    double total = 0.0;
    for (int j = 0; j < k; ++j) total += std::exp(z[j] - zmax);
    const double log_total = std::log(total);
    out.loss += -(z[label] - zmax - log_total);
    for (int j = 0; j < k; ++j) {
      const double p = std::exp(z[j] - zmax - log_total);
      dz[j] = static_cast<float>((p - (j == label ? 1.0 : 0.0)) / n);
    }
  }
  out.loss /= n;
  return out;
}

}  // namespace dndx::nn
