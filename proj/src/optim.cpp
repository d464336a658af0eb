#include "dfkd/optim.hpp"

#include <cmath>

namespace dfkd {

template <typename T>
SgdMomentum<T>::SgdMomentum(std::vector<Tensor<T>> params, T momentum)
    : params_(std::move(params)), momentum_(momentum) {
  velocity_.reserve(params_.size());
  for (auto& p : params_)
    velocity_.emplace_back(static_cast<size_t>(p.size()), T(0));
}

template <typename T>
void SgdMomentum<T>::step(T lr) {
  check<ConfigError>(lr >= T(0), "sgd: negative learning rate ", lr);
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto v = velocity_[i].data();
    auto w = p.mutable_data();
    const int64_t n = p.size();
#pragma omp parallel for simd schedule(static)
    for (int64_t j = 0; j < n; ++j) {
      v[j] = momentum_ * v[j] + g[j];
      w[j] -= lr * v[j];
    }
  }
  ++steps_;
}

template <typename T>
void SgdMomentum<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, T beta1, T beta2, T eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& p : params_) {
    m_.emplace_back(static_cast<size_t>(p.size()), T(0));
    v_.emplace_back(static_cast<size_t>(p.size()), T(0));
  }
}

template <typename T>
void Adam<T>::step(T lr) {
  check<ConfigError>(lr >= T(0), "adam: negative learning rate ", lr);
  ++steps_;
  const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(steps_));
  const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(steps_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto m = m_[i].data();
    auto v = v_[i].data();
    auto w = p.mutable_data();
    const int64_t n = p.size();
#pragma omp parallel for simd schedule(static)
    for (int64_t j = 0; j < n; ++j) {
      m[j] = beta1_ * m[j] + (T(1) - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (T(1) - beta2_) * g[j] * g[j];
      const T mh = m[j] / bc1;
      const T vh = v[j] / bc2;
      w[j] -= lr * mh / (std::sqrt(vh) + eps_);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double lr_at(const LrSchedule& s, int64_t step) {
  check<ConfigError>(s.warmup_steps <= s.total_steps,
                     "lr schedule: warmup ", s.warmup_steps,
                     " exceeds total ", s.total_steps);
  check<UsageError>(step >= 0 && step <= s.total_steps, "lr_at: step ", step,
                    " outside [0,", s.total_steps, "]");
  double lr;
  if (s.warmup_steps > 0 && step < s.warmup_steps) {
    lr = s.peak_lr * static_cast<double>(step) /
         static_cast<double>(s.warmup_steps);
  } else {
    const double span = static_cast<double>(s.total_steps - s.warmup_steps);
    const double progress =
        span > 0 ? static_cast<double>(step - s.warmup_steps) / span : 1.0;
    lr = s.peak_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
  }
  for (const auto& [at, factor] : s.drops)
    if (step >= at) lr *= factor;
  return lr;
}

template class SgdMomentum<float>;
template class SgdMomentum<double>;
template class Adam<float>;
template class Adam<double>;

}  // namespace dfkd
