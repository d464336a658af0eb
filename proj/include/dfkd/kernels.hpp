#pragma once

#include <cmath>
#include <cstdint>

#include "dfkd/common.hpp"

// Low-level numeric kernels. Two backends share one contract:
//
//   serial:   naive reference loops, single-threaded, written for clarity.
//             They define the semantics of every kernel.
//   parallel: OpenMP + SIMD implementations. Parallelism is only over
//             independent outputs (rows, images, channels); every reduction
//             runs in a fixed order, so results do not depend on the thread
//             count and runs are bitwise reproducible.
//
// The dispatching functions at the bottom select the active backend.
// tools/bench_kernels compares the two for speed, tests/ for agreement.

namespace dfkd::kernels {

enum class Backend { serial, parallel };

Backend backend();
void set_backend(Backend b);

// Thread cap: min(OMP default, DFKD_THREADS env var when set).
int effective_threads();

struct BackendGuard {
  explicit BackendGuard(Backend b) : prev_(backend()) { set_backend(b); }
  ~BackendGuard() { set_backend(prev_); }
  BackendGuard(const BackendGuard&) = delete;
  BackendGuard& operator=(const BackendGuard&) = delete;

 private:
  Backend prev_;
};

struct ConvDims {
  int64_t n, ci, h, w;      // input
  int64_t co, kh, kw;       // filter
  int64_t stride, pad;
  int64_t oh, ow;           // output spatial size
};

#define DFKD_KERNEL_DECLS                                                     \
  template <typename T>                                                       \
  void conv2d_forward(const T* x, const T* wt, const T* bias, T* y,           \
                      const ConvDims& d);                                     \
  template <typename T>                                                       \
  void conv2d_backward_input(const T* dy, const T* wt, T* dx,                 \
                             const ConvDims& d);                              \
  template <typename T>                                                       \
  void conv2d_backward_weight(const T* dy, const T* x, T* dw,                 \
                              const ConvDims& d);                             \
  template <typename T>                                                       \
  void conv2d_backward_bias(const T* dy, T* db, const ConvDims& d);           \
                                                                              \
  /* y[N,K] = x[N,F] * w[K,F]^T (+ bias[K]) */                                \
  template <typename T>                                                       \
  void linear_forward(const T* x, const T* w, const T* bias, T* y,            \
                      int64_t n, int64_t f, int64_t k);                       \
  template <typename T>                                                       \
  void linear_backward_input(const T* dy, const T* w, T* dx, int64_t n,       \
                             int64_t f, int64_t k);                           \
  template <typename T>                                                       \
  void linear_backward_weight(const T* dy, const T* x, T* dw, int64_t n,      \
                              int64_t f, int64_t k);                          \
  template <typename T>                                                       \
  void linear_backward_bias(const T* dy, T* db, int64_t n, int64_t k);        \
                                                                              \
  /* biased per-channel moments over N*H*W */                                 \
  template <typename T>                                                       \
  void channel_moments(const T* x, int64_t n, int64_t c, int64_t hw,          \
                       T* mean, T* var);                                      \
  template <typename T>                                                       \
  void channel_mean_backward(const T* dmean, int64_t n, int64_t c,            \
                             int64_t hw, T* dx);                              \
  template <typename T>                                                       \
  void channel_var_backward(const T* dvar, const T* x, const T* mean,         \
                            int64_t n, int64_t c, int64_t hw, T* dx);         \
                                                                              \
  /* y = (x - mean_c) / sqrt(var_c + eps) * gamma_c + beta_c */               \
  template <typename T>                                                       \
  void bn_apply(const T* x, const T* gamma, const T* beta, const T* mean,     \
                const T* var, T eps, T* y, int64_t n, int64_t c, int64_t hw); \
  /* gradients through batch statistics (train mode) */                       \
  template <typename T>                                                       \
  void bn_backward_train(const T* x, const T* dy, const T* gamma,             \
                         const T* mean, const T* var, T eps, T* dx,           \
                         T* dgamma, T* dbeta, int64_t n, int64_t c,           \
                         int64_t hw);                                         \
  /* gradients with fixed statistics (eval mode) */                           \
  template <typename T>                                                       \
  void bn_backward_eval(const T* x, const T* dy, const T* gamma,              \
                        const T* mean, const T* var, T eps, T* dx,            \
                        T* dgamma, T* dbeta, int64_t n, int64_t c,            \
                        int64_t hw);                                          \
                                                                              \
  template <typename T>                                                       \
  void relu_forward(const T* x, int64_t n, T* y);                             \
  template <typename T>                                                       \
  void relu_backward(const T* x, const T* dy, int64_t n, T* dx);              \
                                                                              \
  template <typename T>                                                       \
  void avgpool2d_forward(const T* x, int64_t n, int64_t c, int64_t h,         \
                         int64_t w, int64_t k, int64_t stride, T* y,          \
                         int64_t oh, int64_t ow);                             \
  template <typename T>                                                       \
  void avgpool2d_backward(const T* dy, int64_t n, int64_t c, int64_t h,       \
                          int64_t w, int64_t k, int64_t stride, T* dx,        \
                          int64_t oh, int64_t ow);                            \
  template <typename T>                                                       \
  void global_avgpool_forward(const T* x, int64_t n, int64_t c, int64_t hw,   \
                              T* y);                                          \
  template <typename T>                                                       \
  void global_avgpool_backward(const T* dy, int64_t n, int64_t c,             \
                               int64_t hw, T* dx);                            \
                                                                              \
  /* depthwise smoothing with a separable kernel, reflect padding */          \
  template <typename T>                                                       \
  void smooth_forward(const T* x, int64_t n, int64_t c, int64_t h,            \
                      int64_t w, const T* k1d, int64_t ksize, T* y);          \
  template <typename T>                                                       \
  void smooth_backward(const T* dy, int64_t n, int64_t c, int64_t h,          \
                       int64_t w, const T* k1d, int64_t ksize, T* dx);        \
                                                                              \
  /* quantize-dequantize; in_range (optional) records the STE mask */         \
  template <typename T>                                                       \
  void fake_quant_pertensor(const T* x, int64_t n, T scale, int zp,           \
                            int qmin, int qmax, T* y, uint8_t* in_range);     \
  /* one scale per leading-dim slice of size `stride` */                      \
  template <typename T>                                                       \
  void fake_quant_perchannel(const T* x, int64_t channels, int64_t stride,    \
                             const T* scales, int qmin, int qmax, T* y,       \
                             uint8_t* in_range);

namespace serial {
DFKD_KERNEL_DECLS
}
namespace par {
DFKD_KERNEL_DECLS
}

#undef DFKD_KERNEL_DECLS

// Dispatchers.
#define DFKD_DISPATCH(fn, ...)                  \
  (backend() == Backend::serial ? serial::fn(__VA_ARGS__) : par::fn(__VA_ARGS__))

template <typename T>
void conv2d_forward(const T* x, const T* wt, const T* bias, T* y,
                    const ConvDims& d) {
  DFKD_DISPATCH(conv2d_forward, x, wt, bias, y, d);
}
template <typename T>
void conv2d_backward_input(const T* dy, const T* wt, T* dx, const ConvDims& d) {
  DFKD_DISPATCH(conv2d_backward_input, dy, wt, dx, d);
}
template <typename T>
void conv2d_backward_weight(const T* dy, const T* x, T* dw, const ConvDims& d) {
  DFKD_DISPATCH(conv2d_backward_weight, dy, x, dw, d);
}
template <typename T>
void conv2d_backward_bias(const T* dy, T* db, const ConvDims& d) {
  DFKD_DISPATCH(conv2d_backward_bias, dy, db, d);
}
template <typename T>
void linear_forward(const T* x, const T* w, const T* bias, T* y, int64_t n,
                    int64_t f, int64_t k) {
  DFKD_DISPATCH(linear_forward, x, w, bias, y, n, f, k);
}
template <typename T>
void linear_backward_input(const T* dy, const T* w, T* dx, int64_t n,
                           int64_t f, int64_t k) {
  DFKD_DISPATCH(linear_backward_input, dy, w, dx, n, f, k);
}
template <typename T>
void linear_backward_weight(const T* dy, const T* x, T* dw, int64_t n,
                            int64_t f, int64_t k) {
  DFKD_DISPATCH(linear_backward_weight, dy, x, dw, n, f, k);
}
template <typename T>
void linear_backward_bias(const T* dy, T* db, int64_t n, int64_t k) {
  DFKD_DISPATCH(linear_backward_bias, dy, db, n, k);
}
template <typename T>
void channel_moments(const T* x, int64_t n, int64_t c, int64_t hw, T* mean,
                     T* var) {
  DFKD_DISPATCH(channel_moments, x, n, c, hw, mean, var);
}
template <typename T>
void channel_mean_backward(const T* dmean, int64_t n, int64_t c, int64_t hw,
                           T* dx) {
  DFKD_DISPATCH(channel_mean_backward, dmean, n, c, hw, dx);
}
template <typename T>
void channel_var_backward(const T* dvar, const T* x, const T* mean, int64_t n,
                          int64_t c, int64_t hw, T* dx) {
  DFKD_DISPATCH(channel_var_backward, dvar, x, mean, n, c, hw, dx);
}
template <typename T>
void bn_apply(const T* x, const T* gamma, const T* beta, const T* mean,
              const T* var, T eps, T* y, int64_t n, int64_t c, int64_t hw) {
  DFKD_DISPATCH(bn_apply, x, gamma, beta, mean, var, eps, y, n, c, hw);
}
template <typename T>
void bn_backward_train(const T* x, const T* dy, const T* gamma, const T* mean,
                       const T* var, T eps, T* dx, T* dgamma, T* dbeta,
                       int64_t n, int64_t c, int64_t hw) {
  DFKD_DISPATCH(bn_backward_train, x, dy, gamma, mean, var, eps, dx, dgamma,
                dbeta, n, c, hw);
}
template <typename T>
void bn_backward_eval(const T* x, const T* dy, const T* gamma, const T* mean,
                      const T* var, T eps, T* dx, T* dgamma, T* dbeta,
                      int64_t n, int64_t c, int64_t hw) {
  DFKD_DISPATCH(bn_backward_eval, x, dy, gamma, mean, var, eps, dx, dgamma,
                dbeta, n, c, hw);
}
template <typename T>
void relu_forward(const T* x, int64_t n, T* y) {
  DFKD_DISPATCH(relu_forward, x, n, y);
}
template <typename T>
void relu_backward(const T* x, const T* dy, int64_t n, T* dx) {
  DFKD_DISPATCH(relu_backward, x, dy, n, dx);
}
template <typename T>
void avgpool2d_forward(const T* x, int64_t n, int64_t c, int64_t h, int64_t w,
                       int64_t k, int64_t stride, T* y, int64_t oh,
                       int64_t ow) {
  DFKD_DISPATCH(avgpool2d_forward, x, n, c, h, w, k, stride, y, oh, ow);
}
template <typename T>
void avgpool2d_backward(const T* dy, int64_t n, int64_t c, int64_t h,
                        int64_t w, int64_t k, int64_t stride, T* dx,
                        int64_t oh, int64_t ow) {
  DFKD_DISPATCH(avgpool2d_backward, dy, n, c, h, w, k, stride, dx, oh, ow);
}
template <typename T>
void global_avgpool_forward(const T* x, int64_t n, int64_t c, int64_t hw,
                            T* y) {
  DFKD_DISPATCH(global_avgpool_forward, x, n, c, hw, y);
}
template <typename T>
void global_avgpool_backward(const T* dy, int64_t n, int64_t c, int64_t hw,
                             T* dx) {
  DFKD_DISPATCH(global_avgpool_backward, dy, n, c, hw, dx);
}
template <typename T>
void smooth_forward(const T* x, int64_t n, int64_t c, int64_t h, int64_t w,
                    const T* k1d, int64_t ksize, T* y) {
  DFKD_DISPATCH(smooth_forward, x, n, c, h, w, k1d, ksize, y);
}
template <typename T>
void smooth_backward(const T* dy, int64_t n, int64_t c, int64_t h, int64_t w,
                     const T* k1d, int64_t ksize, T* dx) {
  DFKD_DISPATCH(smooth_backward, dy, n, c, h, w, k1d, ksize, dx);
}
template <typename T>
void fake_quant_pertensor(const T* x, int64_t n, T scale, int zp, int qmin,
                          int qmax, T* y, uint8_t* in_range) {
  DFKD_DISPATCH(fake_quant_pertensor, x, n, scale, zp, qmin, qmax, y, in_range);
}
template <typename T>
void fake_quant_perchannel(const T* x, int64_t channels, int64_t stride,
                           const T* scales, int qmin, int qmax, T* y,
                           uint8_t* in_range) {
  DFKD_DISPATCH(fake_quant_perchannel, x, channels, stride, scales, qmin, qmax,
                y, in_range);
}

#undef DFKD_DISPATCH

// Round half away from zero, the rounding rule used by all quantizers.
template <typename T>
inline T round_away(T v) {
  T r = std::floor(std::abs(v) + T(0.5));
  return v < T(0) ? -r : r;
}

inline int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride,
                               int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace dfkd::kernels
