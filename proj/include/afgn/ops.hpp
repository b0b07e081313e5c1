#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "afgn/gemm.hpp"
#include "afgn/parallel.hpp"
#include "afgn/tensor.hpp"

namespace afgn {

namespace detail {

constexpr int kConvCols = 0;
constexpr int kConvDcols = 1;

template <typename T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride,
            int pad, int Ho, int Wo, T* cols) {
  // cols: [C*kh*kw, Ho*Wo]
  const size_t plane = static_cast<size_t>(H) * W;
  size_t r = 0;
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j, ++r) {
        T* dst = cols + r * static_cast<size_t>(Ho) * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          int iy = oy * stride + i - pad;
          T* drow = dst + static_cast<size_t>(oy) * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(drow, drow + Wo, T(0));
            continue;
          }
          const T* srow = x + c * plane + static_cast<size_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            int ix = ox * stride + j - pad;
            drow[ox] = (ix >= 0 && ix < W) ? srow[ix] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col: x[c, iy, ix] += cols[(c,i,j), (oy,ox)].
template <typename T>
void col2im_add(const T* cols, int C, int H, int W, int kh, int kw, int stride,
                int pad, int Ho, int Wo, T* x) {
  const size_t plane = static_cast<size_t>(H) * W;
  size_t r = 0;
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j, ++r) {
        const T* src = cols + r * static_cast<size_t>(Ho) * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          int iy = oy * stride + i - pad;
          if (iy < 0 || iy >= H) continue;
          const T* srow = src + static_cast<size_t>(oy) * Wo;
          T* drow = x + c * plane + static_cast<size_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            int ix = ox * stride + j - pad;
            if (ix >= 0 && ix < W) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace detail

// Cross-correlation of a batch with a kernel bank.
// input [N,C,H,W], kernel [K,C,kh,kw] -> [N,K,H',W'],
// H' = floor((H + 2*pad - kh)/stride) + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride,
                 int pad) {
  if (input.rank() != 4 || kernel.rank() != 4)
    throw ShapeError("conv2d: need rank-4 input and kernel, got input " +
                     shape_string(input.shape()) + " kernel " +
                     shape_string(kernel.shape()));
  if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
  if (pad < 0) throw ValueError("conv2d: pad must be >= 0");
  const int N = static_cast<int>(input.extent(0));
  const int C = static_cast<int>(input.extent(1));
  const int H = static_cast<int>(input.extent(2));
  const int W = static_cast<int>(input.extent(3));
  const int K = static_cast<int>(kernel.extent(0));
  const int kh = static_cast<int>(kernel.extent(2));
  const int kw = static_cast<int>(kernel.extent(3));
  if (static_cast<int>(kernel.extent(1)) != C)
    throw ShapeError("conv2d: kernel expects " +
                     std::to_string(kernel.extent(1)) + " channels, input " +
                     shape_string(input.shape()) + " has " + std::to_string(C));
  if (kh > H + 2 * pad || kw > W + 2 * pad)
    throw ShapeError("conv2d: kernel " + shape_string(kernel.shape()) +
                     " larger than padded input " +
                     shape_string(input.shape()) + " with pad " +
                     std::to_string(pad));
  const int Ho = detail::conv_out_extent(H, kh, stride, pad);
  const int Wo = detail::conv_out_extent(W, kw, stride, pad);
  const size_t ckk = static_cast<size_t>(C) * kh * kw;
  const size_t ocols = static_cast<size_t>(Ho) * Wo;
  const size_t in_plane = static_cast<size_t>(C) * H * W;
  const size_t out_plane = static_cast<size_t>(K) * ocols;

  std::vector<T> value(static_cast<size_t>(N) * out_plane);
  {
    const T* xp = input.data();
    const T* wp = kernel.data();
    T* yp = value.data();
    parallel_for(static_cast<size_t>(N), [&](size_t n) {
      std::vector<T>& cols = tls_scratch<T, detail::kConvCols>(ckk * ocols);
      detail::im2col(xp + n * in_plane, C, H, W, kh, kw, stride, pad, Ho, Wo,
                     cols.data());
      gemm(false, static_cast<size_t>(K), ocols, ckk, wp, cols.data(),
           yp + n * out_plane);
    });
  }

  auto xd = input.impl();
  auto wd = kernel.impl();
  auto fn = [=](const detail::TensorData<T>& out) {
    const T* gout = out.grad.data();
    const bool need_dx = xd->requires_grad;
    const bool need_dw = wd->requires_grad;
    if (need_dx) xd->ensure_grad();
    if (need_dw) wd->ensure_grad();
    const size_t wsz = static_cast<size_t>(K) * ckk;
    std::vector<T> partials(need_dw ? static_cast<size_t>(N) * wsz : 0);
    const T* xp = xd->value.data();
    const T* wp = wd->value.data();
    T* xg = need_dx ? xd->grad.data() : nullptr;
    parallel_for(static_cast<size_t>(N), [&](size_t n) {
      std::vector<T>& cols = tls_scratch<T, detail::kConvCols>(ckk * ocols);
      if (need_dw) {
        detail::im2col(xp + n * in_plane, C, H, W, kh, kw, stride, pad, Ho, Wo,
                       cols.data());
        gemm_bt(false, static_cast<size_t>(K), ckk, ocols,
                gout + n * out_plane, cols.data(), partials.data() + n * wsz);
      }
      if (need_dx) {
        std::vector<T>& dcols = tls_scratch<T, detail::kConvDcols>(ckk * ocols);
        gemm_at(false, ckk, ocols, static_cast<size_t>(K), wp,
                gout + n * out_plane, dcols.data());
        detail::col2im_add(dcols.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
                           xg + n * in_plane);
      }
    });
    if (need_dw) {
      T* wg = wd->grad.data();
      for (int n = 0; n < N; ++n) {
        const T* src = partials.data() + static_cast<size_t>(n) * wsz;
        for (size_t i = 0; i < wsz; ++i) wg[i] += src[i];
      }
    }
  };
  return Tensor<T>::make_node(
      {static_cast<size_t>(N), static_cast<size_t>(K), static_cast<size_t>(Ho),
       static_cast<size_t>(Wo)},
      std::move(value), {input, kernel}, std::move(fn));
}

// Adjoint of conv2d under matched stride/pad.
// input [N,C,H,W], kernel [C,K,kh,kw] -> [N,K,H',W'],
// H' = (H - 1)*stride - 2*pad + kh.
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& input, const Tensor<T>& kernel,
                           int stride, int pad) {
  if (input.rank() != 4 || kernel.rank() != 4)
    throw ShapeError("conv2d_transpose: need rank-4 input and kernel, got "
                     "input " +
                     shape_string(input.shape()) + " kernel " +
                     shape_string(kernel.shape()));
  if (stride < 1) throw ValueError("conv2d_transpose: stride must be >= 1");
  if (pad < 0) throw ValueError("conv2d_transpose: pad must be >= 0");
  const int N = static_cast<int>(input.extent(0));
  const int C = static_cast<int>(input.extent(1));
  const int H = static_cast<int>(input.extent(2));
  const int W = static_cast<int>(input.extent(3));
  const int K = static_cast<int>(kernel.extent(1));
  const int kh = static_cast<int>(kernel.extent(2));
  const int kw = static_cast<int>(kernel.extent(3));
  if (static_cast<int>(kernel.extent(0)) != C)
    throw ShapeError("conv2d_transpose: kernel expects " +
                     std::to_string(kernel.extent(0)) + " channels, input " +
                     shape_string(input.shape()) + " has " + std::to_string(C));
  const int Ho = (H - 1) * stride - 2 * pad + kh;
  const int Wo = (W - 1) * stride - 2 * pad + kw;
  if (Ho < 1 || Wo < 1)
    throw ShapeError("conv2d_transpose: output extent " + std::to_string(Ho) +
                     "x" + std::to_string(Wo) + " collapses for input " +
                     shape_string(input.shape()));
  const size_t kkk = static_cast<size_t>(K) * kh * kw;
  const size_t icols = static_cast<size_t>(H) * W;
  const size_t in_plane = static_cast<size_t>(C) * icols;
  const size_t out_plane = static_cast<size_t>(K) * Ho * Wo;

  std::vector<T> value(static_cast<size_t>(N) * out_plane, T(0));
  {
    const T* xp = input.data();
    const T* wp = kernel.data();
    T* yp = value.data();
    parallel_for(static_cast<size_t>(N), [&](size_t n) {
      std::vector<T>& cols = tls_scratch<T, detail::kConvCols>(kkk * icols);
      // cols[(k,i,j),(y,x)] = sum_c w[c,k,i,j] * x[c,y,x]
      gemm_at(false, kkk, icols, static_cast<size_t>(C), wp, xp + n * in_plane,
              cols.data());
      detail::col2im_add(cols.data(), K, Ho, Wo, kh, kw, stride, pad, H, W,
                         yp + n * out_plane);
    });
  }

  auto xd = input.impl();
  auto wd = kernel.impl();
  auto fn = [=](const detail::TensorData<T>& out) {
    const T* gout = out.grad.data();
    const bool need_dx = xd->requires_grad;
    const bool need_dw = wd->requires_grad;
    if (need_dx) xd->ensure_grad();
    if (need_dw) wd->ensure_grad();
    const size_t wsz = static_cast<size_t>(C) * kkk;
    std::vector<T> partials(need_dw ? static_cast<size_t>(N) * wsz : 0);
    const T* xp = xd->value.data();
    const T* wp = wd->value.data();
    T* xg = need_dx ? xd->grad.data() : nullptr;
    parallel_for(static_cast<size_t>(N), [&](size_t n) {
      std::vector<T>& cols = tls_scratch<T, detail::kConvCols>(kkk * icols);
      detail::im2col(gout + n * out_plane, K, Ho, Wo, kh, kw, stride, pad, H,
                     W, cols.data());
      if (need_dx)
        gemm(true, static_cast<size_t>(C), icols, kkk, wp, cols.data(),
             xg + n * in_plane);
      if (need_dw)
        gemm_bt(false, static_cast<size_t>(C), kkk, icols, xp + n * in_plane,
                cols.data(), partials.data() + n * wsz);
    });
    if (need_dw) {
      T* wg = wd->grad.data();
      for (int n = 0; n < N; ++n) {
        const T* src = partials.data() + static_cast<size_t>(n) * wsz;
        for (size_t i = 0; i < wsz; ++i) wg[i] += src[i];
      }
    }
  };
  return Tensor<T>::make_node(
      {static_cast<size_t>(N), static_cast<size_t>(K), static_cast<size_t>(Ho),
       static_cast<size_t>(Wo)},
      std::move(value), {input, kernel}, std::move(fn));
}

// Elementwise max(0, x); subgradient at 0 is 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  std::vector<T> value(input.values().begin(), input.values().end());
  for (T& v : value)
    if (v < T(0)) v = T(0);
  auto xd = input.impl();
  auto fn = [=](const detail::TensorData<T>& out) {
    if (!xd->requires_grad) return;
    xd->ensure_grad();
    const T* gout = out.grad.data();
    const T* x = xd->value.data();
    T* gx = xd->grad.data();
    for (size_t i = 0; i < xd->value.size(); ++i)
      if (x[i] > T(0)) gx[i] += gout[i];
  };
  return Tensor<T>::make_node(input.shape(), std::move(value), {input},
                              std::move(fn));
}

// Per-channel bias over [N,C,H,W].
template <typename T>
Tensor<T> bias_add(const Tensor<T>& input, const Tensor<T>& bias) {
  if (input.rank() != 4 || bias.rank() != 1 ||
      bias.extent(0) != input.extent(1))
    throw ShapeError("bias_add: input " + shape_string(input.shape()) +
                     " incompatible with bias " + shape_string(bias.shape()));
  const size_t N = input.extent(0), C = input.extent(1);
  const size_t plane = input.extent(2) * input.extent(3);
  std::vector<T> value(input.values().begin(), input.values().end());
  {
    const T* b = bias.data();
    for (size_t n = 0; n < N; ++n)
      for (size_t c = 0; c < C; ++c) {
        T* row = value.data() + (n * C + c) * plane;
        for (size_t i = 0; i < plane; ++i) row[i] += b[c];
      }
  }
  auto xd = input.impl();
  auto bd = bias.impl();
  auto fn = [=](const detail::TensorData<T>& out) {
    const T* gout = out.grad.data();
    if (xd->requires_grad) {
      xd->ensure_grad();
      T* gx = xd->grad.data();
      for (size_t i = 0; i < xd->value.size(); ++i) gx[i] += gout[i];
    }
    if (bd->requires_grad) {
      bd->ensure_grad();
      T* gb = bd->grad.data();
      for (size_t n = 0; n < N; ++n)
        for (size_t c = 0; c < C; ++c) {
          const T* row = gout + (n * C + c) * plane;
          T s = T(0);
          for (size_t i = 0; i < plane; ++i) s += row[i];
          gb[c] += s;
        }
    }
  };
  return Tensor<T>::make_node(input.shape(), std::move(value), {input, bias},
                              std::move(fn));
}

// Fully connected layer: y[N,O] = x[N,D] * w[O,D]^T + b[O].
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias) {
  if (input.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 ||
      weight.extent(1) != input.extent(1) || bias.extent(0) != weight.extent(0))
    throw ShapeError("linear: input " + shape_string(input.shape()) +
                     ", weight " + shape_string(weight.shape()) + ", bias " +
                     shape_string(bias.shape()) + " do not chain");
  const size_t N = input.extent(0), D = input.extent(1), O = weight.extent(0);
  std::vector<T> value(N * O);
  gemm_bt(false, N, O, D, input.data(), weight.data(), value.data());
  {
    const T* b = bias.data();
    for (size_t n = 0; n < N; ++n)
      for (size_t o = 0; o < O; ++o) value[n * O + o] += b[o];
  }
  auto xd = input.impl();
  auto wd = weight.impl();
  auto bd = bias.impl();
  auto fn = [=](const detail::TensorData<T>& out) {
    const T* gout = out.grad.data();
    if (xd->requires_grad) {
      xd->ensure_grad();
      gemm(true, N, D, O, gout, wd->value.data(), xd->grad.data());
    }
    if (wd->requires_grad) {
      wd->ensure_grad();
      gemm_at(true, O, D, N, gout, xd->value.data(), wd->grad.data());
    }
    if (bd->requires_grad) {
      bd->ensure_grad();
      T* gb = bd->grad.data();
      for (size_t n = 0; n < N; ++n)
        for (size_t o = 0; o < O; ++o) gb[o] += gout[n * O + o];
    }
  };
  return Tensor<T>::make_node({N, O}, std::move(value), {input, weight, bias},
                              std::move(fn));
}

// Spatial mean: [N,C,H,W] -> [N,C].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  if (input.rank() != 4)
    throw ShapeError("global_avg_pool: need rank-4 input, got " +
                     shape_string(input.shape()));
  const size_t N = input.extent(0), C = input.extent(1);
  const size_t plane = input.extent(2) * input.extent(3);
  std::vector<T> value(N * C);
  {
    const T* x = input.data();
    for (size_t i = 0; i < N * C; ++i) {
      T s = T(0);
      const T* row = x + i * plane;
      for (size_t j = 0; j < plane; ++j) s += row[j];
      value[i] = s / static_cast<T>(plane);
    }
  }
  auto xd = input.impl();
  auto fn = [=](const detail::TensorData<T>& out) {
    if (!xd->requires_grad) return;
    xd->ensure_grad();
    const T* gout = out.grad.data();
    T* gx = xd->grad.data();
    const T inv = T(1) / static_cast<T>(plane);
    for (size_t i = 0; i < N * C; ++i) {
      T g = gout[i] * inv;
      T* row = gx + i * plane;
      for (size_t j = 0; j < plane; ++j) row[j] += g;
    }
  };
  return Tensor<T>::make_node({N, C}, std::move(value), {input}, std::move(fn));
}

// Mean over all elements of (pred - target)^2.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss: pred " + shape_string(pred.shape()) +
                     " vs target " + shape_string(target.shape()));
  const size_t n = pred.numel();
  double acc = 0.0;
  {
    const T* p = pred.data();
    const T* t = target.data();
    for (size_t i = 0; i < n; ++i) {
      double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
      acc += d * d;
    }
  }
  std::vector<T> value{static_cast<T>(acc / static_cast<double>(n))};
  auto pd = pred.impl();
  auto td = target.impl();
  auto fn = [=](const detail::TensorData<T>& out) {
    const T g = out.grad[0] * T(2) / static_cast<T>(n);
    const T* p = pd->value.data();
    const T* t = td->value.data();
    if (pd->requires_grad) {
      pd->ensure_grad();
      T* gp = pd->grad.data();
      for (size_t i = 0; i < n; ++i) gp[i] += g * (p[i] - t[i]);
    }
    if (td->requires_grad) {
      td->ensure_grad();
      T* gt = td->grad.data();
      for (size_t i = 0; i < n; ++i) gt[i] -= g * (p[i] - t[i]);
    }
  };
  return Tensor<T>::make_node({1}, std::move(value), {pred, target},
                              std::move(fn));
}

// Mean over rows of -y^T log softmax(z), stabilized by max-subtraction.
// Labels may be soft; each row must be nonnegative and sum to 1 within 1e-6.
// Gradients flow to the logits only.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits,
                                const Tensor<T>& labels) {
  if (logits.rank() != 2 || logits.shape() != labels.shape())
    throw ShapeError("softmax_cross_entropy: logits " +
                     shape_string(logits.shape()) + " vs labels " +
                     shape_string(labels.shape()));
  const size_t N = logits.extent(0), M = logits.extent(1);
  const T* z = logits.data();
  const T* y = labels.data();
  for (size_t n = 0; n < N; ++n) {
    double sum = 0.0;
    for (size_t k = 0; k < M; ++k) {
      const T v = y[n * M + k];
      if (v < T(0))
        throw ValueError("softmax_cross_entropy: negative label entry in row " +
                         std::to_string(n));
      sum += static_cast<double>(v);
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw ValueError("softmax_cross_entropy: label row " + std::to_string(n) +
                       " sums to " + std::to_string(sum) + ", expected 1");
  }

  std::vector<T> lse(N);
  double acc = 0.0;
  for (size_t n = 0; n < N; ++n) {
    const T* zr = z + n * M;
    T m = zr[0];
    for (size_t k = 1; k < M; ++k) m = std::max(m, zr[k]);
    double e = 0.0;
    for (size_t k = 0; k < M; ++k)
      e += std::exp(static_cast<double>(zr[k] - m));
    double row_lse = static_cast<double>(m) + std::log(e);
    lse[n] = static_cast<T>(row_lse);
    double dot = 0.0;
    for (size_t k = 0; k < M; ++k)
      dot += static_cast<double>(y[n * M + k]) * static_cast<double>(zr[k]);
    acc += row_lse - dot;
  }
  std::vector<T> value{static_cast<T>(acc / static_cast<double>(N))};

  auto zd = logits.impl();
  auto yd = labels.impl();
  auto fn = [=](const detail::TensorData<T>& out) {
    if (!zd->requires_grad) return;
    zd->ensure_grad();
    const T g = out.grad[0] / static_cast<T>(N);
    const T* zz = zd->value.data();
    const T* yy = yd->value.data();
    T* gz = zd->grad.data();
    for (size_t n = 0; n < N; ++n)
      for (size_t k = 0; k < M; ++k) {
        T p = std::exp(zz[n * M + k] - lse[n]);
        gz[n * M + k] += g * (p - yy[n * M + k]);
      }
  };
  return Tensor<T>::make_node({1}, std::move(value), {logits, labels},
                              std::move(fn));
}

// Sum of all elements.
template <typename T>
Tensor<T> sum(const Tensor<T>& input) {
  double acc = 0.0;
  for (T v : input.values()) acc += static_cast<double>(v);
  std::vector<T> value{static_cast<T>(acc)};
  auto xd = input.impl();
  auto fn = [=](const detail::TensorData<T>& out) {
    if (!xd->requires_grad) return;
    xd->ensure_grad();
    const T g = out.grad[0];
    for (T& gv : xd->grad) gv += g;
  };
  return Tensor<T>::make_node({1}, std::move(value), {input}, std::move(fn));
}

// Row-wise softmax (inference utility, no graph).
template <typename T>
std::vector<T> softmax_rows(const Tensor<T>& logits) {
  const size_t N = logits.extent(0), M = logits.extent(1);
  std::vector<T> out(N * M);
  const T* z = logits.data();
  for (size_t n = 0; n < N; ++n) {
    const T* zr = z + n * M;
    T m = zr[0];
    for (size_t k = 1; k < M; ++k) m = std::max(m, zr[k]);
    double e = 0.0;
    for (size_t k = 0; k < M; ++k)
      e += std::exp(static_cast<double>(zr[k] - m));
    for (size_t k = 0; k < M; ++k)
      out[n * M + k] =
          static_cast<T>(std::exp(static_cast<double>(zr[k] - m)) / e);
  }
  return out;
}

}  // namespace afgn
