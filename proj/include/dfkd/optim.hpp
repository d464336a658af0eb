#pragma once

#include <vector>

#include "dfkd/tensor.hpp"

namespace dfkd {

// v <- momentum*v + g;  theta <- theta - lr*v
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor<T>> params, T momentum);
  void step(T lr);
  void zero_grad();
  int64_t steps() const { return steps_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> velocity_;
  T momentum_;
  int64_t steps_ = 0;
};

// Bias-corrected Adam.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, T beta1 = T(0.9), T beta2 = T(0.999),
       T eps = T(1e-8));
  void step(T lr);
  void zero_grad();
  int64_t steps() const { return steps_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  T beta1_, beta2_, eps_;
  int64_t steps_ = 0;
};

// Linear warmup 0 -> peak over warmup_steps, then cosine decay to 0 at
// total_steps; each (step, factor) drop multiplies the rate at and after
// its step.
struct LrSchedule {
  double peak_lr = 0.1;
  int64_t warmup_steps = 0;
  int64_t total_steps = 1;
  std::vector<std::pair<int64_t, double>> drops;
};

double lr_at(const LrSchedule& s, int64_t step);

extern template class SgdMomentum<float>;
extern template class SgdMomentum<double>;
extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace dfkd
