// Reference backend: plain loops, no threading, no tiling. Defines the
// semantics every optimized kernel must reproduce.

#include <algorithm>
#include <cmath>
#include <cstring>

#include "dfkd/kernels.hpp"

namespace dfkd::kernels::serial {

template <typename T>
void conv2d_forward(const T* x, const T* wt, const T* bias, T* y,
                    const ConvDims& d) {
  for (int64_t n = 0; n < d.n; ++n)
    for (int64_t o = 0; o < d.co; ++o)
      for (int64_t py = 0; py < d.oh; ++py)
        for (int64_t px = 0; px < d.ow; ++px) {
          T acc = bias ? bias[o] : T(0);
          for (int64_t ci = 0; ci < d.ci; ++ci)
            for (int64_t ky = 0; ky < d.kh; ++ky)
              for (int64_t kx = 0; kx < d.kw; ++kx) {
                int64_t iy = py * d.stride - d.pad + ky;
                int64_t ix = px * d.stride - d.pad + kx;
                if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) continue;
                acc += x[((n * d.ci + ci) * d.h + iy) * d.w + ix] *
                       wt[((o * d.ci + ci) * d.kh + ky) * d.kw + kx];
              }
          y[((n * d.co + o) * d.oh + py) * d.ow + px] = acc;
        }
}

template <typename T>
void conv2d_backward_input(const T* dy, const T* wt, T* dx, const ConvDims& d) {
  for (int64_t n = 0; n < d.n; ++n)
    for (int64_t o = 0; o < d.co; ++o)
      for (int64_t py = 0; py < d.oh; ++py)
        for (int64_t px = 0; px < d.ow; ++px) {
          T g = dy[((n * d.co + o) * d.oh + py) * d.ow + px];
          for (int64_t ci = 0; ci < d.ci; ++ci)
            for (int64_t ky = 0; ky < d.kh; ++ky)
              for (int64_t kx = 0; kx < d.kw; ++kx) {
                int64_t iy = py * d.stride - d.pad + ky;
                int64_t ix = px * d.stride - d.pad + kx;
                if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) continue;
                dx[((n * d.ci + ci) * d.h + iy) * d.w + ix] +=
                    g * wt[((o * d.ci + ci) * d.kh + ky) * d.kw + kx];
              }
        }
}

template <typename T>
void conv2d_backward_weight(const T* dy, const T* x, T* dw, const ConvDims& d) {
  for (int64_t n = 0; n < d.n; ++n)
    for (int64_t o = 0; o < d.co; ++o)
      for (int64_t py = 0; py < d.oh; ++py)
        for (int64_t px = 0; px < d.ow; ++px) {
          T g = dy[((n * d.co + o) * d.oh + py) * d.ow + px];
          for (int64_t ci = 0; ci < d.ci; ++ci)
            for (int64_t ky = 0; ky < d.kh; ++ky)
              for (int64_t kx = 0; kx < d.kw; ++kx) {
                int64_t iy = py * d.stride - d.pad + ky;
                int64_t ix = px * d.stride - d.pad + kx;
                if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) continue;
                dw[((o * d.ci + ci) * d.kh + ky) * d.kw + kx] +=
                    g * x[((n * d.ci + ci) * d.h + iy) * d.w + ix];
              }
        }
}

template <typename T>
void conv2d_backward_bias(const T* dy, T* db, const ConvDims& d) {
  for (int64_t n = 0; n < d.n; ++n)
    for (int64_t o = 0; o < d.co; ++o)
      for (int64_t p = 0; p < d.oh * d.ow; ++p)
        db[o] += dy[(n * d.co + o) * d.oh * d.ow + p];
}

template <typename T>
void linear_forward(const T* x, const T* w, const T* bias, T* y, int64_t n,
                    int64_t f, int64_t k) {
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < k; ++j) {
      T acc = bias ? bias[j] : T(0);
      for (int64_t c = 0; c < f; ++c) acc += x[i * f + c] * w[j * f + c];
      y[i * k + j] = acc;
    }
}

template <typename T>
void linear_backward_input(const T* dy, const T* w, T* dx, int64_t n,
                           int64_t f, int64_t k) {
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < k; ++j) {
      T g = dy[i * k + j];
      for (int64_t c = 0; c < f; ++c) dx[i * f + c] += g * w[j * f + c];
    }
}

template <typename T>
void linear_backward_weight(const T* dy, const T* x, T* dw, int64_t n,
                            int64_t f, int64_t k) {
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < k; ++j) {
      T g = dy[i * k + j];
      for (int64_t c = 0; c < f; ++c) dw[j * f + c] += g * x[i * f + c];
    }
}

template <typename T>
void linear_backward_bias(const T* dy, T* db, int64_t n, int64_t k) {
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < k; ++j) db[j] += dy[i * k + j];
}

template <typename T>
void channel_moments(const T* x, int64_t n, int64_t c, int64_t hw, T* mean,
                     T* var) {
  const int64_t m = n * hw;
  for (int64_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* p = x + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) sum += p[j];
    }
    double mu = sum / static_cast<double>(m);
    double sq = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* p = x + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        double dlt = p[j] - mu;
        sq += dlt * dlt;
      }
    }
    mean[ch] = static_cast<T>(mu);
    var[ch] = static_cast<T>(sq / static_cast<double>(m));
  }
}

template <typename T>
void channel_mean_backward(const T* dmean, int64_t n, int64_t c, int64_t hw,
                           T* dx) {
  const T inv = T(1) / static_cast<T>(n * hw);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      T g = dmean[ch] * inv;
      T* p = dx + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) p[j] += g;
    }
}

template <typename T>
void channel_var_backward(const T* dvar, const T* x, const T* mean, int64_t n,
                          int64_t c, int64_t hw, T* dx) {
  const T inv = T(2) / static_cast<T>(n * hw);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      T g = dvar[ch] * inv;
      T mu = mean[ch];
      const T* px = x + (i * c + ch) * hw;
      T* p = dx + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) p[j] += g * (px[j] - mu);
    }
}

template <typename T>
void bn_apply(const T* x, const T* gamma, const T* beta, const T* mean,
              const T* var, T eps, T* y, int64_t n, int64_t c, int64_t hw) {
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      T inv_std = T(1) / std::sqrt(var[ch] + eps);
      T a = gamma[ch] * inv_std;
      T b = beta[ch] - mean[ch] * a;
      const T* px = x + (i * c + ch) * hw;
      T* py = y + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) py[j] = px[j] * a + b;
    }
}

template <typename T>
void bn_backward_train(const T* x, const T* dy, const T* gamma, const T* mean,
                       const T* var, T eps, T* dx, T* dgamma, T* dbeta,
                       int64_t n, int64_t c, int64_t hw) {
  const int64_t m = n * hw;
  for (int64_t ch = 0; ch < c; ++ch) {
    T inv_std = T(1) / std::sqrt(var[ch] + eps);
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* px = x + (i * c + ch) * hw;
      const T* pg = dy + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        T xh = (px[j] - mean[ch]) * inv_std;
        sum_dy += pg[j];
        sum_dy_xh += pg[j] * xh;
      }
    }
    dgamma[ch] += static_cast<T>(sum_dy_xh);
    dbeta[ch] += static_cast<T>(sum_dy);
    T mean_dy = static_cast<T>(sum_dy / static_cast<double>(m));
    T mean_dy_xh = static_cast<T>(sum_dy_xh / static_cast<double>(m));
    T a = gamma[ch] * inv_std;
    for (int64_t i = 0; i < n; ++i) {
      const T* px = x + (i * c + ch) * hw;
      const T* pg = dy + (i * c + ch) * hw;
      T* pd = dx + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        T xh = (px[j] - mean[ch]) * inv_std;
        pd[j] += a * (pg[j] - mean_dy - xh * mean_dy_xh);
      }
    }
  }
}

template <typename T>
void bn_backward_eval(const T* x, const T* dy, const T* gamma, const T* mean,
                      const T* var, T eps, T* dx, T* dgamma, T* dbeta,
                      int64_t n, int64_t c, int64_t hw) {
  for (int64_t ch = 0; ch < c; ++ch) {
    T inv_std = T(1) / std::sqrt(var[ch] + eps);
    T a = gamma[ch] * inv_std;
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* px = x + (i * c + ch) * hw;
      const T* pg = dy + (i * c + ch) * hw;
      T* pd = dx + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        sum_dy += pg[j];
        sum_dy_xh += pg[j] * (px[j] - mean[ch]) * inv_std;
        pd[j] += a * pg[j];
      }
    }
    dgamma[ch] += static_cast<T>(sum_dy_xh);
    dbeta[ch] += static_cast<T>(sum_dy);
  }
}

template <typename T>
void relu_forward(const T* x, int64_t n, T* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* x, const T* dy, int64_t n, T* dx) {
  // Subgradient at 0 is 0.
  for (int64_t i = 0; i < n; ++i)
    if (x[i] > T(0)) dx[i] += dy[i];
}

template <typename T>
void avgpool2d_forward(const T* x, int64_t n, int64_t c, int64_t h, int64_t w,
                       int64_t k, int64_t stride, T* y, int64_t oh,
                       int64_t ow) {
  const T inv = T(1) / static_cast<T>(k * k);
  for (int64_t i = 0; i < n * c; ++i) {
    const T* px = x + i * h * w;
    T* py = y + i * oh * ow;
    for (int64_t py_i = 0; py_i < oh; ++py_i)
      for (int64_t px_i = 0; px_i < ow; ++px_i) {
        T acc = 0;
        for (int64_t ky = 0; ky < k; ++ky)
          for (int64_t kx = 0; kx < k; ++kx)
            acc += px[(py_i * stride + ky) * w + px_i * stride + kx];
        py[py_i * ow + px_i] = acc * inv;
      }
  }
}

template <typename T>
void avgpool2d_backward(const T* dy, int64_t n, int64_t c, int64_t h,
                        int64_t w, int64_t k, int64_t stride, T* dx,
                        int64_t oh, int64_t ow) {
  const T inv = T(1) / static_cast<T>(k * k);
  for (int64_t i = 0; i < n * c; ++i) {
    const T* pg = dy + i * oh * ow;
    T* pd = dx + i * h * w;
    for (int64_t py_i = 0; py_i < oh; ++py_i)
      for (int64_t px_i = 0; px_i < ow; ++px_i) {
        T g = pg[py_i * ow + px_i] * inv;
        for (int64_t ky = 0; ky < k; ++ky)
          for (int64_t kx = 0; kx < k; ++kx)
            pd[(py_i * stride + ky) * w + px_i * stride + kx] += g;
      }
  }
}

template <typename T>
void global_avgpool_forward(const T* x, int64_t n, int64_t c, int64_t hw,
                            T* y) {
  const T inv = T(1) / static_cast<T>(hw);
  for (int64_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    const T* p = x + i * hw;
    for (int64_t j = 0; j < hw; ++j) acc += p[j];
    y[i] = static_cast<T>(acc) * inv;
  }
}

template <typename T>
void global_avgpool_backward(const T* dy, int64_t n, int64_t c, int64_t hw,
                             T* dx) {
  const T inv = T(1) / static_cast<T>(hw);
  for (int64_t i = 0; i < n * c; ++i) {
    T g = dy[i] * inv;
    T* p = dx + i * hw;
    for (int64_t j = 0; j < hw; ++j) p[j] += g;
  }
}

// Reflect an index into [0, n) without repeating the border sample.
inline int64_t reflect(int64_t i, int64_t n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

template <typename T>
void smooth_forward(const T* x, int64_t n, int64_t c, int64_t h, int64_t w,
                    const T* k1d, int64_t ksize, T* y) {
  const int64_t r = ksize / 2;
  std::vector<T> tmp(static_cast<size_t>(h * w));
  for (int64_t i = 0; i < n * c; ++i) {
    const T* px = x + i * h * w;
    // horizontal pass
    for (int64_t iy = 0; iy < h; ++iy)
      for (int64_t ix = 0; ix < w; ++ix) {
        T acc = 0;
        for (int64_t t = 0; t < ksize; ++t)
          acc += k1d[t] * px[iy * w + reflect(ix + t - r, w)];
        tmp[iy * w + ix] = acc;
      }
    // vertical pass
    T* py = y + i * h * w;
    for (int64_t iy = 0; iy < h; ++iy)
      for (int64_t ix = 0; ix < w; ++ix) {
        T acc = 0;
        for (int64_t t = 0; t < ksize; ++t)
          acc += k1d[t] * tmp[reflect(iy + t - r, h) * w + ix];
        py[iy * w + ix] = acc;
      }
  }
}

template <typename T>
void smooth_backward(const T* dy, int64_t n, int64_t c, int64_t h, int64_t w,
                     const T* k1d, int64_t ksize, T* dx) {
  const int64_t r = ksize / 2;
  std::vector<T> tmp(static_cast<size_t>(h * w));
  for (int64_t i = 0; i < n * c; ++i) {
    const T* pg = dy + i * h * w;
    std::fill(tmp.begin(), tmp.end(), T(0));
    // adjoint of the vertical pass
    for (int64_t iy = 0; iy < h; ++iy)
      for (int64_t ix = 0; ix < w; ++ix) {
        T g = pg[iy * w + ix];
        for (int64_t t = 0; t < ksize; ++t)
          tmp[reflect(iy + t - r, h) * w + ix] += k1d[t] * g;
      }
    // adjoint of the horizontal pass
    T* pd = dx + i * h * w;
    for (int64_t iy = 0; iy < h; ++iy)
      for (int64_t ix = 0; ix < w; ++ix) {
        T g = tmp[iy * w + ix];
        for (int64_t t = 0; t < ksize; ++t)
          pd[iy * w + reflect(ix + t - r, w)] += k1d[t] * g;
      }
  }
}

template <typename T>
void fake_quant_pertensor(const T* x, int64_t n, T scale, int zp, int qmin,
                          int qmax, T* y, uint8_t* in_range) {
  const T inv = T(1) / scale;
  for (int64_t i = 0; i < n; ++i) {
    T q = round_away(x[i] * inv) + static_cast<T>(zp);
    bool ok = q >= static_cast<T>(qmin) && q <= static_cast<T>(qmax);
    q = std::clamp(q, static_cast<T>(qmin), static_cast<T>(qmax));
    y[i] = (q - static_cast<T>(zp)) * scale;
    if (in_range) in_range[i] = ok ? 1 : 0;
  }
}

template <typename T>
void fake_quant_perchannel(const T* x, int64_t channels, int64_t stride,
                           const T* scales, int qmin, int qmax, T* y,
                           uint8_t* in_range) {
  for (int64_t ch = 0; ch < channels; ++ch)
    fake_quant_pertensor(x + ch * stride, stride, scales[ch], 0, qmin, qmax,
                         y + ch * stride,
                         in_range ? in_range + ch * stride : nullptr);
}

#define DFKD_INSTANTIATE(T)                                                    \
  template void conv2d_forward<T>(const T*, const T*, const T*, T*,           \
                                  const ConvDims&);                           \
  template void conv2d_backward_input<T>(const T*, const T*, T*,              \
                                         const ConvDims&);                    \
  template void conv2d_backward_weight<T>(const T*, const T*, T*,             \
                                          const ConvDims&);                   \
  template void conv2d_backward_bias<T>(const T*, T*, const ConvDims&);       \
  template void linear_forward<T>(const T*, const T*, const T*, T*, int64_t,  \
                                  int64_t, int64_t);                          \
  template void linear_backward_input<T>(const T*, const T*, T*, int64_t,     \
                                         int64_t, int64_t);                   \
  template void linear_backward_weight<T>(const T*, const T*, T*, int64_t,    \
                                          int64_t, int64_t);                  \
  template void linear_backward_bias<T>(const T*, T*, int64_t, int64_t);      \
  template void channel_moments<T>(const T*, int64_t, int64_t, int64_t, T*,   \
                                   T*);                                       \
  template void channel_mean_backward<T>(const T*, int64_t, int64_t, int64_t, \
                                         T*);                                 \
  template void channel_var_backward<T>(const T*, const T*, const T*,         \
                                        int64_t, int64_t, int64_t, T*);       \
  template void bn_apply<T>(const T*, const T*, const T*, const T*, const T*, \
                            T, T*, int64_t, int64_t, int64_t);                \
  template void bn_backward_train<T>(const T*, const T*, const T*, const T*,  \
                                     const T*, T, T*, T*, T*, int64_t,        \
                                     int64_t, int64_t);                       \
  template void bn_backward_eval<T>(const T*, const T*, const T*, const T*,   \
                                    const T*, T, T*, T*, T*, int64_t,         \
                                    int64_t, int64_t);                        \
  template void relu_forward<T>(const T*, int64_t, T*);                       \
  template void relu_backward<T>(const T*, const T*, int64_t, T*);            \
  template void avgpool2d_forward<T>(const T*, int64_t, int64_t, int64_t,     \
                                     int64_t, int64_t, int64_t, T*, int64_t,  \
                                     int64_t);                                \
  template void avgpool2d_backward<T>(const T*, int64_t, int64_t, int64_t,    \
                                      int64_t, int64_t, int64_t, T*, int64_t, \
                                      int64_t);                               \
  template void global_avgpool_forward<T>(const T*, int64_t, int64_t,         \
                                          int64_t, T*);                       \
  template void global_avgpool_backward<T>(const T*, int64_t, int64_t,        \
                                           int64_t, T*);                      \
  template void smooth_forward<T>(const T*, int64_t, int64_t, int64_t,        \
                                  int64_t, const T*, int64_t, T*);            \
  template void smooth_backward<T>(const T*, int64_t, int64_t, int64_t,       \
                                   int64_t, const T*, int64_t, T*);           \
  template void fake_quant_pertensor<T>(const T*, int64_t, T, int, int, int,  \
                                        T*, uint8_t*);                        \
  template void fake_quant_perchannel<T>(const T*, int64_t, int64_t,          \
                                         const T*, int, int, T*, uint8_t*);

DFKD_INSTANTIATE(float)
DFKD_INSTANTIATE(double)

#undef DFKD_INSTANTIATE

}  // namespace dfkd::kernels::serial
