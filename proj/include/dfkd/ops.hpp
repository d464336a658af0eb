#pragma once

#include <optional>

#include "dfkd/kernels.hpp"
#include "dfkd/tensor.hpp"

namespace dfkd {

enum class BnMode { train, eval };

// ---- elementwise / arithmetic ----
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> log(const Tensor<T>& a);
template <typename T> Tensor<T> sqrt(const Tensor<T>& a);

// ---- reductions / shape ----
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, const Shape& s);
template <typename T> Tensor<T> flatten(const Tensor<T>& a);  // N x rest
template <typename T> Tensor<T> concat0(const std::vector<Tensor<T>>& parts);

// ---- neural-net layers ----
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const std::optional<Tensor<T>>& bias, int64_t stride,
                 int64_t pad);
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight,
                 const std::optional<Tensor<T>>& bias);
// Train mode normalizes with batch moments and (when update_running) folds
// them into the running buffers as r <- (1-momentum)*r + momentum*batch.
// Eval mode normalizes with the running buffers.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma,
                     const Tensor<T>& beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var, BnMode mode, T momentum, T eps,
                     bool update_running = true);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& a, int64_t k, int64_t stride);
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& a);
template <typename T>
Tensor<T> gaussian_smooth(const Tensor<T>& a, int64_t kernel_size, T sigma);

// Normalized 1-D Gaussian taps used by gaussian_smooth (separable form).
template <typename T>
std::vector<T> gaussian_kernel_1d(int64_t kernel_size, T sigma);

// ---- per-channel statistics (inputs NCHW, outputs C) ----
template <typename T> Tensor<T> channel_mean(const Tensor<T>& a);
template <typename T> Tensor<T> channel_var(const Tensor<T>& a);  // biased

// ---- quantization ----
// x_hat = (clamp(round(x/s)+z, qmin, qmax) - z)*s. With ste, gradient is 1
// where the pre-clamp integer lies inside [qmin,qmax] and 0 elsewhere;
// without ste no gradient flows.
template <typename T>
Tensor<T> fake_quant(const Tensor<T>& x, T scale, int zero_point, int qmin,
                     int qmax, bool ste = true);
// One symmetric scale per slice of dim 0 (weights), zero point 0.
template <typename T>
Tensor<T> fake_quant_per_channel(const Tensor<T>& x,
                                 const std::vector<T>& scales, int qmin,
                                 int qmax, bool ste = true);

// ---- losses (scalar outputs, shape {1}) ----
template <typename T>
Tensor<T> loss_smooth_l1(const Tensor<T>& a, const Tensor<T>& b);
// mean_n KL(softmax(teacher_n) || softmax(student_n)); teacher side is
// treated as constant, gradient reaches the student logits only.
template <typename T>
Tensor<T> loss_kd_kl(const Tensor<T>& teacher_logits,
                     const Tensor<T>& student_logits);
template <typename T>
Tensor<T> loss_inception(const Tensor<T>& logits,
                         const std::vector<int64_t>& targets, T scale);
template <typename T>
Tensor<T> loss_cross_entropy(const Tensor<T>& logits,
                             const std::vector<int64_t>& labels);
template <typename T> Tensor<T> loss_mse(const Tensor<T>& a, const Tensor<T>& b);

// ---- differentiable batch transforms (for in-batch augmentation) ----
template <typename T> Tensor<T> flip_horizontal(const Tensor<T>& a);
// Per-sample axis-aligned crop box {y0, x0, height, width} in input pixels,
// bilinearly resized back to the input extent.
struct CropBox {
  double y0, x0, h, w;
};
template <typename T>
Tensor<T> crop_resize(const Tensor<T>& a, const std::vector<CropBox>& boxes);
// Multiply by a per-sample spatial mask (broadcast over channels); the mask
// is a constant, gradient flows through the input only.
template <typename T>
Tensor<T> mul_spatial_mask(const Tensor<T>& a, const std::vector<T>& mask);

// ---- plain helpers (no autodiff) ----
template <typename T>
void softmax_rows(std::span<const T> logits, int64_t rows, int64_t cols,
                  std::span<T> out);
template <typename T>
std::vector<int64_t> argmax_rows(const Tensor<T>& logits);

}  // namespace dfkd
