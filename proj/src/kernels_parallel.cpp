// Optimized backend: im2col + register-blocked GEMM, OpenMP across
// independent outputs (rows / images / channels). Accumulation order inside
// every output element is fixed, so results are identical for any thread
// count; they agree with the serial reference to rounding error.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "dfkd/kernels.hpp"

namespace dfkd::kernels::par {

namespace {

// C[M,N] (+)= A[M,K] * B[K,N], parallel over rows of C.
template <typename T>
void gemm_ab(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k,
             bool acc) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!acc) std::fill(ci, ci + n, T(0));
    const T* ai = a + i * k;
    int64_t p = 0;
    for (; p + 4 <= k; p += 4) {
      const T a0 = ai[p], a1 = ai[p + 1], a2 = ai[p + 2], a3 = ai[p + 3];
      const T* b0 = b + p * n;
      const T* b1 = b0 + n;
      const T* b2 = b1 + n;
      const T* b3 = b2 + n;
#pragma omp simd
      for (int64_t j = 0; j < n; ++j)
        ci[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
    }
    for (; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + p * n;
#pragma omp simd
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[M,N] (+)= A[M,K] * B[N,K]^T, parallel over rows of C.
template <typename T>
void gemm_abt(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k,
              bool acc) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T dot = 0;
#pragma omp simd reduction(+ : dot)
      for (int64_t p = 0; p < k; ++p) dot += ai[p] * bj[p];
      if (acc)
        c[i * n + j] += dot;
      else
        c[i * n + j] = dot;
    }
  }
}

// C[M,F] += A[N,M]^T * B[N,F], parallel over rows of C (fixed n order).
template <typename T>
void gemm_atb_acc(const T* a, const T* b, T* c, int64_t n, int64_t m,
                  int64_t f) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    T* ci = c + i * f;
    for (int64_t r = 0; r < n; ++r) {
      const T av = a[r * m + i];
      const T* br = b + r * f;
#pragma omp simd
      for (int64_t j = 0; j < f; ++j) ci[j] += av * br[j];
    }
  }
}

// col[kp][p] with kp = (ci,ky,kx), p = (py,px); out-of-image taps are 0.
template <typename T>
void im2col(const T* x, const ConvDims& d, T* col) {
  const int64_t pcount = d.oh * d.ow;
  for (int64_t ci = 0; ci < d.ci; ++ci)
    for (int64_t ky = 0; ky < d.kh; ++ky)
      for (int64_t kx = 0; kx < d.kw; ++kx) {
        T* dst = col + ((ci * d.kh + ky) * d.kw + kx) * pcount;
        const T* src = x + ci * d.h * d.w;
        for (int64_t py = 0; py < d.oh; ++py) {
          const int64_t iy = py * d.stride - d.pad + ky;
          T* row = dst + py * d.ow;
          if (iy < 0 || iy >= d.h) {
            std::fill(row, row + d.ow, T(0));
            continue;
          }
          const T* srow = src + iy * d.w;
          for (int64_t px = 0; px < d.ow; ++px) {
            const int64_t ix = px * d.stride - d.pad + kx;
            row[px] = (ix >= 0 && ix < d.w) ? srow[ix] : T(0);
          }
        }
      }
}

template <typename T>
void col2im_add(const T* col, const ConvDims& d, T* x) {
  const int64_t pcount = d.oh * d.ow;
  for (int64_t ci = 0; ci < d.ci; ++ci)
    for (int64_t ky = 0; ky < d.kh; ++ky)
      for (int64_t kx = 0; kx < d.kw; ++kx) {
        const T* src = col + ((ci * d.kh + ky) * d.kw + kx) * pcount;
        T* dst = x + ci * d.h * d.w;
        for (int64_t py = 0; py < d.oh; ++py) {
          const int64_t iy = py * d.stride - d.pad + ky;
          if (iy < 0 || iy >= d.h) continue;
          T* drow = dst + iy * d.w;
          const T* srow = src + py * d.ow;
          for (int64_t px = 0; px < d.ow; ++px) {
            const int64_t ix = px * d.stride - d.pad + kx;
            if (ix >= 0 && ix < d.w) drow[ix] += srow[px];
          }
        }
      }
}

template <typename T>
std::vector<T>& scratch(int which, size_t size) {
  static thread_local std::vector<T> bufs[3];
  auto& b = bufs[which];
  if (b.size() < size) b.resize(size);
  return b;
}

}  // namespace

template <typename T>
void conv2d_forward(const T* x, const T* wt, const T* bias, T* y,
                    const ConvDims& d) {
  const int64_t kp = d.ci * d.kh * d.kw;
  const int64_t pcount = d.oh * d.ow;
#pragma omp parallel for schedule(static)
  for (int64_t n = 0; n < d.n; ++n) {
    auto& col = scratch<T>(0, static_cast<size_t>(kp * pcount));
    im2col(x + n * d.ci * d.h * d.w, d, col.data());
    T* yi = y + n * d.co * pcount;
    if (bias) {
      for (int64_t o = 0; o < d.co; ++o)
        std::fill(yi + o * pcount, yi + (o + 1) * pcount, bias[o]);
      gemm_ab(wt, col.data(), yi, d.co, pcount, kp, /*acc=*/true);
    } else {
      gemm_ab(wt, col.data(), yi, d.co, pcount, kp, /*acc=*/false);
    }
  }
}

template <typename T>
void conv2d_backward_input(const T* dy, const T* wt, T* dx, const ConvDims& d) {
  const int64_t kp = d.ci * d.kh * d.kw;
  const int64_t pcount = d.oh * d.ow;
  auto& wtr = scratch<T>(1, static_cast<size_t>(kp * d.co));
  for (int64_t o = 0; o < d.co; ++o)
    for (int64_t i = 0; i < kp; ++i) wtr[i * d.co + o] = wt[o * kp + i];
#pragma omp parallel for schedule(static)
  for (int64_t n = 0; n < d.n; ++n) {
    auto& col = scratch<T>(0, static_cast<size_t>(kp * pcount));
    gemm_ab(wtr.data(), dy + n * d.co * pcount, col.data(), kp, pcount, d.co,
            /*acc=*/false);
    col2im_add(col.data(), d, dx + n * d.ci * d.h * d.w);
  }
}

template <typename T>
void conv2d_backward_weight(const T* dy, const T* x, T* dw, const ConvDims& d) {
  const int64_t kp = d.ci * d.kh * d.kw;
  const int64_t pcount = d.oh * d.ow;
  auto& col = scratch<T>(2, static_cast<size_t>(kp * pcount));
  // Images in fixed order so the accumulation into dw is deterministic.
  for (int64_t n = 0; n < d.n; ++n) {
    im2col(x + n * d.ci * d.h * d.w, d, col.data());
    gemm_abt(dy + n * d.co * pcount, col.data(), dw, d.co, kp, pcount,
             /*acc=*/true);
  }
}

template <typename T>
void conv2d_backward_bias(const T* dy, T* db, const ConvDims& d) {
  const int64_t pcount = d.oh * d.ow;
#pragma omp parallel for schedule(static)
  for (int64_t o = 0; o < d.co; ++o) {
    T acc = 0;
    for (int64_t n = 0; n < d.n; ++n) {
      const T* p = dy + (n * d.co + o) * pcount;
#pragma omp simd reduction(+ : acc)
      for (int64_t j = 0; j < pcount; ++j) acc += p[j];
    }
    db[o] += acc;
  }
}

template <typename T>
void linear_forward(const T* x, const T* w, const T* bias, T* y, int64_t n,
                    int64_t f, int64_t k) {
  gemm_abt(x, w, y, n, k, f, /*acc=*/false);
  if (bias) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < k; ++j) y[i * k + j] += bias[j];
  }
}

template <typename T>
void linear_backward_input(const T* dy, const T* w, T* dx, int64_t n,
                           int64_t f, int64_t k) {
  gemm_ab(dy, w, dx, n, f, k, /*acc=*/true);
}

template <typename T>
void linear_backward_weight(const T* dy, const T* x, T* dw, int64_t n,
                            int64_t f, int64_t k) {
  gemm_atb_acc(dy, x, dw, n, k, f);
}

template <typename T>
void linear_backward_bias(const T* dy, T* db, int64_t n, int64_t k) {
#pragma omp parallel for schedule(static)
  for (int64_t j = 0; j < k; ++j) {
    T acc = 0;
    for (int64_t i = 0; i < n; ++i) acc += dy[i * k + j];
    db[j] += acc;
  }
}

template <typename T>
void channel_moments(const T* x, int64_t n, int64_t c, int64_t hw, T* mean,
                     T* var) {
  const int64_t m = n * hw;
#pragma omp parallel for schedule(static)
  for (int64_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* p = x + (i * c + ch) * hw;
#pragma omp simd reduction(+ : sum)
      for (int64_t j = 0; j < hw; ++j) sum += p[j];
    }
    const double mu = sum / static_cast<double>(m);
    double sq = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* p = x + (i * c + ch) * hw;
#pragma omp simd reduction(+ : sq)
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
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T g = dmean[ch] * inv;
      T* p = dx + (i * c + ch) * hw;
#pragma omp simd
      for (int64_t j = 0; j < hw; ++j) p[j] += g;
    }
}

template <typename T>
void channel_var_backward(const T* dvar, const T* x, const T* mean, int64_t n,
                          int64_t c, int64_t hw, T* dx) {
  const T inv = T(2) / static_cast<T>(n * hw);
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T g = dvar[ch] * inv;
      const T mu = mean[ch];
      const T* px = x + (i * c + ch) * hw;
      T* p = dx + (i * c + ch) * hw;
#pragma omp simd
      for (int64_t j = 0; j < hw; ++j) p[j] += g * (px[j] - mu);
    }
}

template <typename T>
void bn_apply(const T* x, const T* gamma, const T* beta, const T* mean,
              const T* var, T eps, T* y, int64_t n, int64_t c, int64_t hw) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T a = gamma[ch] / std::sqrt(var[ch] + eps);
      const T b = beta[ch] - mean[ch] * a;
      const T* px = x + (i * c + ch) * hw;
      T* py = y + (i * c + ch) * hw;
#pragma omp simd
      for (int64_t j = 0; j < hw; ++j) py[j] = px[j] * a + b;
    }
}

template <typename T>
void bn_backward_train(const T* x, const T* dy, const T* gamma, const T* mean,
                       const T* var, T eps, T* dx, T* dgamma, T* dbeta,
                       int64_t n, int64_t c, int64_t hw) {
  const int64_t m = n * hw;
#pragma omp parallel for schedule(static)
  for (int64_t ch = 0; ch < c; ++ch) {
    const T inv_std = T(1) / std::sqrt(var[ch] + eps);
    const T mu = mean[ch];
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* px = x + (i * c + ch) * hw;
      const T* pg = dy + (i * c + ch) * hw;
#pragma omp simd reduction(+ : sum_dy, sum_dy_xh)
      for (int64_t j = 0; j < hw; ++j) {
        sum_dy += pg[j];
        sum_dy_xh += pg[j] * (px[j] - mu) * inv_std;
      }
    }
    dgamma[ch] += static_cast<T>(sum_dy_xh);
    dbeta[ch] += static_cast<T>(sum_dy);
    const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(m));
    const T mean_dy_xh = static_cast<T>(sum_dy_xh / static_cast<double>(m));
    const T a = gamma[ch] * inv_std;
    for (int64_t i = 0; i < n; ++i) {
      const T* px = x + (i * c + ch) * hw;
      const T* pg = dy + (i * c + ch) * hw;
      T* pd = dx + (i * c + ch) * hw;
#pragma omp simd
      for (int64_t j = 0; j < hw; ++j)
        pd[j] += a * (pg[j] - mean_dy - (px[j] - mu) * inv_std * mean_dy_xh);
    }
  }
}

template <typename T>
void bn_backward_eval(const T* x, const T* dy, const T* gamma, const T* mean,
                      const T* var, T eps, T* dx, T* dgamma, T* dbeta,
                      int64_t n, int64_t c, int64_t hw) {
#pragma omp parallel for schedule(static)
  for (int64_t ch = 0; ch < c; ++ch) {
    const T inv_std = T(1) / std::sqrt(var[ch] + eps);
    const T mu = mean[ch];
    const T a = gamma[ch] * inv_std;
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* px = x + (i * c + ch) * hw;
      const T* pg = dy + (i * c + ch) * hw;
      T* pd = dx + (i * c + ch) * hw;
#pragma omp simd reduction(+ : sum_dy, sum_dy_xh)
      for (int64_t j = 0; j < hw; ++j) {
        sum_dy += pg[j];
        sum_dy_xh += pg[j] * (px[j] - mu) * inv_std;
        pd[j] += a * pg[j];
      }
    }
    dgamma[ch] += static_cast<T>(sum_dy_xh);
    dbeta[ch] += static_cast<T>(sum_dy);
  }
}

template <typename T>
void relu_forward(const T* x, int64_t n, T* y) {
#pragma omp parallel for simd schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* x, const T* dy, int64_t n, T* dx) {
#pragma omp parallel for simd schedule(static)
  for (int64_t i = 0; i < n; ++i) dx[i] += x[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
void avgpool2d_forward(const T* x, int64_t n, int64_t c, int64_t h, int64_t w,
                       int64_t k, int64_t stride, T* y, int64_t oh,
                       int64_t ow) {
  const T inv = T(1) / static_cast<T>(k * k);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n * c; ++i) {
    const T* px = x + i * h * w;
    T* py = y + i * oh * ow;
    for (int64_t a = 0; a < oh; ++a)
      for (int64_t b = 0; b < ow; ++b) {
        T acc = 0;
        for (int64_t ky = 0; ky < k; ++ky)
          for (int64_t kx = 0; kx < k; ++kx)
            acc += px[(a * stride + ky) * w + b * stride + kx];
        py[a * ow + b] = acc * inv;
      }
  }
}

template <typename T>
void avgpool2d_backward(const T* dy, int64_t n, int64_t c, int64_t h,
                        int64_t w, int64_t k, int64_t stride, T* dx,
                        int64_t oh, int64_t ow) {
  const T inv = T(1) / static_cast<T>(k * k);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n * c; ++i) {
    const T* pg = dy + i * oh * ow;
    T* pd = dx + i * h * w;
    for (int64_t a = 0; a < oh; ++a)
      for (int64_t b = 0; b < ow; ++b) {
        const T g = pg[a * ow + b] * inv;
        for (int64_t ky = 0; ky < k; ++ky)
          for (int64_t kx = 0; kx < k; ++kx)
            pd[(a * stride + ky) * w + b * stride + kx] += g;
      }
  }
}

template <typename T>
void global_avgpool_forward(const T* x, int64_t n, int64_t c, int64_t hw,
                            T* y) {
  const T inv = T(1) / static_cast<T>(hw);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    const T* p = x + i * hw;
#pragma omp simd reduction(+ : acc)
    for (int64_t j = 0; j < hw; ++j) acc += p[j];
    y[i] = static_cast<T>(acc) * inv;
  }
}

template <typename T>
void global_avgpool_backward(const T* dy, int64_t n, int64_t c, int64_t hw,
                             T* dx) {
  const T inv = T(1) / static_cast<T>(hw);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n * c; ++i) {
    const T g = dy[i] * inv;
    T* p = dx + i * hw;
#pragma omp simd
    for (int64_t j = 0; j < hw; ++j) p[j] += g;
  }
}

namespace {
inline int64_t reflect(int64_t i, int64_t n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}
}  // namespace

template <typename T>
void smooth_forward(const T* x, int64_t n, int64_t c, int64_t h, int64_t w,
                    const T* k1d, int64_t ksize, T* y) {
  const int64_t r = ksize / 2;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n * c; ++i) {
    auto& tmp = scratch<T>(0, static_cast<size_t>(h * w));
    const T* px = x + i * h * w;
    for (int64_t iy = 0; iy < h; ++iy)
      for (int64_t ix = 0; ix < w; ++ix) {
        T acc = 0;
        for (int64_t t = 0; t < ksize; ++t)
          acc += k1d[t] * px[iy * w + reflect(ix + t - r, w)];
        tmp[iy * w + ix] = acc;
      }
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
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n * c; ++i) {
    auto& tmp = scratch<T>(0, static_cast<size_t>(h * w));
    std::fill(tmp.begin(), tmp.begin() + h * w, T(0));
    const T* pg = dy + i * h * w;
    for (int64_t iy = 0; iy < h; ++iy)
      for (int64_t ix = 0; ix < w; ++ix) {
        const T g = pg[iy * w + ix];
        for (int64_t t = 0; t < ksize; ++t)
          tmp[reflect(iy + t - r, h) * w + ix] += k1d[t] * g;
      }
    T* pd = dx + i * h * w;
    for (int64_t iy = 0; iy < h; ++iy)
      for (int64_t ix = 0; ix < w; ++ix) {
        const T g = tmp[iy * w + ix];
        for (int64_t t = 0; t < ksize; ++t)
          pd[iy * w + reflect(ix + t - r, w)] += k1d[t] * g;
      }
  }
}

template <typename T>
void fake_quant_pertensor(const T* x, int64_t n, T scale, int zp, int qmin,
                          int qmax, T* y, uint8_t* in_range) {
  const T inv = T(1) / scale;
  const T lo = static_cast<T>(qmin), hi = static_cast<T>(qmax);
  const T z = static_cast<T>(zp);
  if (in_range) {
#pragma omp parallel for simd schedule(static)
    for (int64_t i = 0; i < n; ++i) {
      T q = round_away(x[i] * inv) + z;
      in_range[i] = (q >= lo && q <= hi) ? 1 : 0;
      q = q < lo ? lo : (q > hi ? hi : q);
      y[i] = (q - z) * scale;
    }
  } else {
#pragma omp parallel for simd schedule(static)
    for (int64_t i = 0; i < n; ++i) {
      T q = round_away(x[i] * inv) + z;
      q = q < lo ? lo : (q > hi ? hi : q);
      y[i] = (q - z) * scale;
    }
  }
}

template <typename T>
void fake_quant_perchannel(const T* x, int64_t channels, int64_t stride,
                           const T* scales, int qmin, int qmax, T* y,
                           uint8_t* in_range) {
  const T lo = static_cast<T>(qmin), hi = static_cast<T>(qmax);
#pragma omp parallel for schedule(static)
  for (int64_t ch = 0; ch < channels; ++ch) {
    const T inv = T(1) / scales[ch];
    const T s = scales[ch];
    const T* px = x + ch * stride;
    T* py = y + ch * stride;
    uint8_t* pm = in_range ? in_range + ch * stride : nullptr;
#pragma omp simd
    for (int64_t i = 0; i < stride; ++i) {
      T q = round_away(px[i] * inv);
      if (pm) pm[i] = (q >= lo && q <= hi) ? 1 : 0;
      q = q < lo ? lo : (q > hi ? hi : q);
      py[i] = q * s;
    }
  }
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

}  // namespace dfkd::kernels::par
