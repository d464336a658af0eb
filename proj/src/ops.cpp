#include "dfkd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dfkd {

namespace {

template <typename T>
using Node = detail::Node<T>;

template <typename T>
Tensor<T> make_node(Shape shape, std::vector<T> value,
                    std::initializer_list<Tensor<T>> parents,
                    std::function<void(Node<T>&)> bp) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  if (GradMode::enabled()) {
    bool any = false;
    for (const auto& p : parents) any = any || p.node()->requires_grad;
    if (any) {
      n->requires_grad = true;
      for (const auto& p : parents) n->parents.push_back(p.shared_node());
      n->backprop = std::move(bp);
    }
  }
  return Tensor<T>::adopt(std::move(n));
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                      const char* op) {
  check<ShapeError>(a.shape() == b.shape(), op, ": shape mismatch ",
                    to_string(a.shape()), " vs ", to_string(b.shape()));
}

template <typename T>
void axpy(std::span<T> dst, std::span<const T> src, T s) {
#pragma omp parallel for simd schedule(static)
  for (int64_t i = 0; i < static_cast<int64_t>(dst.size()); ++i)
    dst[i] += s * src[i];
}

}  // namespace

// ---------------------------------------------------------------- elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  std::vector<T> out(a.data().begin(), a.data().end());
  axpy<T>({out.data(), out.size()}, b.data(), T(1));
  auto* na = a.node();
  auto* nb = b.node();
  return make_node<T>(a.shape(), std::move(out), {a, b}, [na, nb](Node<T>& self) {
    if (na->requires_grad) axpy<T>({na->grad.data(), na->grad.size()},
                                   {self.grad.data(), self.grad.size()}, T(1));
    if (nb->requires_grad) axpy<T>({nb->grad.data(), nb->grad.size()},
                                   {self.grad.data(), self.grad.size()}, T(1));
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  std::vector<T> out(a.data().begin(), a.data().end());
  axpy<T>({out.data(), out.size()}, b.data(), T(-1));
  auto* na = a.node();
  auto* nb = b.node();
  return make_node<T>(a.shape(), std::move(out), {a, b}, [na, nb](Node<T>& self) {
    if (na->requires_grad) axpy<T>({na->grad.data(), na->grad.size()},
                                   {self.grad.data(), self.grad.size()}, T(1));
    if (nb->requires_grad) axpy<T>({nb->grad.data(), nb->grad.size()},
                                   {self.grad.data(), self.grad.size()}, T(-1));
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  const int64_t n = a.size();
  std::vector<T> out(static_cast<size_t>(n));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
#pragma omp parallel for simd schedule(static)
  for (int64_t i = 0; i < n; ++i) out[i] = pa[i] * pb[i];
  auto* na = a.node();
  auto* nb = b.node();
  return make_node<T>(a.shape(), std::move(out), {a, b}, [na, nb](Node<T>& self) {
    const int64_t m = self.size();
    if (na->requires_grad) {
      T* d = na->grad.data();
      const T* g = self.grad.data();
      const T* q = nb->value.data();
#pragma omp parallel for simd schedule(static)
      for (int64_t i = 0; i < m; ++i) d[i] += g[i] * q[i];
    }
    if (nb->requires_grad) {
      T* d = nb->grad.data();
      const T* g = self.grad.data();
      const T* q = na->value.data();
#pragma omp parallel for simd schedule(static)
      for (int64_t i = 0; i < m; ++i) d[i] += g[i] * q[i];
    }
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v += s;
  auto* na = a.node();
  return make_node<T>(a.shape(), std::move(out), {a}, [na](Node<T>& self) {
    if (na->requires_grad) axpy<T>({na->grad.data(), na->grad.size()},
                                   {self.grad.data(), self.grad.size()}, T(1));
  });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  auto* na = a.node();
  return make_node<T>(a.shape(), std::move(out), {a}, [na, s](Node<T>& self) {
    if (na->requires_grad) axpy<T>({na->grad.data(), na->grad.size()},
                                   {self.grad.data(), self.grad.size()}, s);
  });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  const int64_t n = a.size();
  std::vector<T> out(static_cast<size_t>(n));
  const T* pa = a.data().data();
  for (int64_t i = 0; i < n; ++i) out[i] = std::exp(pa[i]);
  auto* na = a.node();
  return make_node<T>(a.shape(), std::move(out), {a}, [na](Node<T>& self) {
    if (!na->requires_grad) return;
    for (int64_t i = 0; i < self.size(); ++i)
      na->grad[i] += self.grad[i] * self.value[i];
  });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  const int64_t n = a.size();
  std::vector<T> out(static_cast<size_t>(n));
  const T* pa = a.data().data();
  for (int64_t i = 0; i < n; ++i) out[i] = std::log(pa[i]);
  auto* na = a.node();
  return make_node<T>(a.shape(), std::move(out), {a}, [na](Node<T>& self) {
    if (!na->requires_grad) return;
    for (int64_t i = 0; i < self.size(); ++i)
      na->grad[i] += self.grad[i] / na->value[i];
  });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  const int64_t n = a.size();
  std::vector<T> out(static_cast<size_t>(n));
  const T* pa = a.data().data();
  for (int64_t i = 0; i < n; ++i) out[i] = std::sqrt(pa[i]);
  auto* na = a.node();
  return make_node<T>(a.shape(), std::move(out), {a}, [na](Node<T>& self) {
    if (!na->requires_grad) return;
    for (int64_t i = 0; i < self.size(); ++i)
      na->grad[i] += self.grad[i] * T(0.5) / self.value[i];
  });
}

// ---------------------------------------------------------------- reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double acc = 0.0;
  for (T v : a.data()) acc += v;
  auto* na = a.node();
  return make_node<T>({1}, {static_cast<T>(acc)}, {a}, [na](Node<T>& self) {
    if (!na->requires_grad) return;
    const T g = self.grad[0];
    for (auto& d : na->grad) d += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  check<UsageError>(a.size() > 0, "mean of empty tensor");
  double acc = 0.0;
  for (T v : a.data()) acc += v;
  const T inv = T(1) / static_cast<T>(a.size());
  auto* na = a.node();
  return make_node<T>({1}, {static_cast<T>(acc) * inv}, {a},
                      [na, inv](Node<T>& self) {
                        if (!na->requires_grad) return;
                        const T g = self.grad[0] * inv;
                        for (auto& d : na->grad) d += g;
                      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& s) {
  check<ShapeError>(numel(s) == a.size(), "reshape ", to_string(a.shape()),
                    " -> ", to_string(s), ": element count differs");
  std::vector<T> out(a.data().begin(), a.data().end());
  auto* na = a.node();
  return make_node<T>(s, std::move(out), {a}, [na](Node<T>& self) {
    if (na->requires_grad) axpy<T>({na->grad.data(), na->grad.size()},
                                   {self.grad.data(), self.grad.size()}, T(1));
  });
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& a) {
  check<ShapeError>(!a.shape().empty(), "flatten needs rank >= 1");
  return reshape(a, {a.dim(0), a.size() / a.dim(0)});
}

template <typename T>
Tensor<T> concat0(const std::vector<Tensor<T>>& parts) {
  check<UsageError>(!parts.empty(), "concat0 of zero tensors");
  Shape s = parts[0].shape();
  int64_t rows = 0;
  for (const auto& p : parts) {
    Shape ps = p.shape();
    check<ShapeError>(ps.size() == s.size(), "concat0: rank mismatch");
    for (size_t d = 1; d < s.size(); ++d)
      check<ShapeError>(ps[d] == s[d], "concat0: trailing dims differ");
    rows += ps[0];
  }
  s[0] = rows;
  std::vector<T> out;
  out.reserve(static_cast<size_t>(numel(s)));
  for (const auto& p : parts)
    out.insert(out.end(), p.data().begin(), p.data().end());

  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(s);
  n->value = std::move(out);
  if (GradMode::enabled()) {
    bool any = false;
    for (const auto& p : parts) any = any || p.node()->requires_grad;
    if (any) {
      n->requires_grad = true;
      for (const auto& p : parts) n->parents.push_back(p.shared_node());
      n->backprop = [](Node<T>& self) {
        size_t off = 0;
        for (auto& pn : self.parents) {
          const size_t len = pn->value.size();
          if (pn->requires_grad)
            for (size_t i = 0; i < len; ++i) pn->grad[i] += self.grad[off + i];
          off += len;
        }
      };
    }
  }
  return Tensor<T>::adopt(std::move(n));
}

// ------------------------------------------------------------------- layers

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const std::optional<Tensor<T>>& bias, int64_t stride,
                 int64_t pad) {
  check<ShapeError>(input.shape().size() == 4, "conv2d: input must be NCHW, got ",
                    to_string(input.shape()));
  check<ShapeError>(weight.shape().size() == 4,
                    "conv2d: weight must be OIHW, got ",
                    to_string(weight.shape()));
  check<ConfigError>(stride >= 1, "conv2d: stride must be >= 1, got ", stride);
  check<ConfigError>(pad >= 0, "conv2d: pad must be >= 0, got ", pad);
  check<ShapeError>(input.dim(1) == weight.dim(1),
                    "conv2d: channel mismatch, input ", to_string(input.shape()),
                    " vs weight ", to_string(weight.shape()));
  if (bias)
    check<ShapeError>(bias->shape() == Shape{weight.dim(0)},
                      "conv2d: bias shape ", to_string(bias->shape()));

  kernels::ConvDims d;
  d.n = input.dim(0);
  d.ci = input.dim(1);
  d.h = input.dim(2);
  d.w = input.dim(3);
  d.co = weight.dim(0);
  d.kh = weight.dim(2);
  d.kw = weight.dim(3);
  d.stride = stride;
  d.pad = pad;
  d.oh = kernels::conv_out_extent(d.h, d.kh, stride, pad);
  d.ow = kernels::conv_out_extent(d.w, d.kw, stride, pad);
  check<ShapeError>(d.oh >= 1 && d.ow >= 1, "conv2d: kernel ", d.kh, "x", d.kw,
                    " does not fit input ", to_string(input.shape()));

  std::vector<T> out(static_cast<size_t>(d.n * d.co * d.oh * d.ow));
  kernels::conv2d_forward(input.data().data(), weight.data().data(),
                          bias ? bias->data().data() : nullptr, out.data(), d);

  auto* nx = input.node();
  auto* nw = weight.node();
  auto* nb = bias ? bias->node() : nullptr;
  auto bp = [nx, nw, nb, d](Node<T>& self) {
    if (nx->requires_grad)
      kernels::conv2d_backward_input(self.grad.data(), nw->value.data(),
                                     nx->grad.data(), d);
    if (nw->requires_grad)
      kernels::conv2d_backward_weight(self.grad.data(), nx->value.data(),
                                      nw->grad.data(), d);
    if (nb && nb->requires_grad)
      kernels::conv2d_backward_bias(self.grad.data(), nb->grad.data(), d);
  };
  if (bias)
    return make_node<T>({d.n, d.co, d.oh, d.ow}, std::move(out),
                        {input, weight, *bias}, std::move(bp));
  return make_node<T>({d.n, d.co, d.oh, d.ow}, std::move(out), {input, weight},
                      std::move(bp));
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight,
                 const std::optional<Tensor<T>>& bias) {
  check<ShapeError>(input.shape().size() == 2, "linear: input must be NxF, got ",
                    to_string(input.shape()));
  check<ShapeError>(weight.shape().size() == 2,
                    "linear: weight must be KxF, got ",
                    to_string(weight.shape()));
  check<ShapeError>(input.dim(1) == weight.dim(1),
                    "linear: inner dims disagree, input ",
                    to_string(input.shape()), " vs weight ",
                    to_string(weight.shape()));
  const int64_t n = input.dim(0), f = input.dim(1), k = weight.dim(0);
  if (bias)
    check<ShapeError>(bias->shape() == Shape{k}, "linear: bias shape ",
                      to_string(bias->shape()), " expected (", k, ")");

  std::vector<T> out(static_cast<size_t>(n * k));
  kernels::linear_forward(input.data().data(), weight.data().data(),
                          bias ? bias->data().data() : nullptr, out.data(), n,
                          f, k);

  auto* nx = input.node();
  auto* nw = weight.node();
  auto* nb = bias ? bias->node() : nullptr;
  auto bp = [nx, nw, nb, n, f, k](Node<T>& self) {
    if (nx->requires_grad)
      kernels::linear_backward_input(self.grad.data(), nw->value.data(),
                                     nx->grad.data(), n, f, k);
    if (nw->requires_grad)
      kernels::linear_backward_weight(self.grad.data(), nx->value.data(),
                                      nw->grad.data(), n, f, k);
    if (nb && nb->requires_grad)
      kernels::linear_backward_bias(self.grad.data(), nb->grad.data(), n, k);
  };
  if (bias)
    return make_node<T>({n, k}, std::move(out), {input, weight, *bias},
                        std::move(bp));
  return make_node<T>({n, k}, std::move(out), {input, weight}, std::move(bp));
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma,
                     const Tensor<T>& beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var, BnMode mode, T momentum, T eps,
                     bool update_running) {
  check<ConfigError>(eps > T(0), "batch_norm: eps must be > 0, got ", eps);
  check<ShapeError>(input.shape().size() == 4,
                    "batch_norm: input must be NCHW, got ",
                    to_string(input.shape()));
  const int64_t n = input.dim(0), c = input.dim(1);
  const int64_t hw = input.dim(2) * input.dim(3);
  for (const Tensor<T>* t : {&gamma, &beta, &running_mean, &running_var})
    check<ShapeError>(t->shape() == Shape{c},
                      "batch_norm: per-channel parameter shape ",
                      to_string(t->shape()), " expected (", c, ")");

  std::vector<T> stat_mean, stat_var;
  if (mode == BnMode::train) {
    check<DataError>(n * hw >= 2,
                     "batch_norm: train mode needs >= 2 values per channel");
    stat_mean.resize(static_cast<size_t>(c));
    stat_var.resize(static_cast<size_t>(c));
    kernels::channel_moments(input.data().data(), n, c, hw, stat_mean.data(),
                             stat_var.data());
    if (update_running) {
      auto rm = running_mean.mutable_data();
      auto rv = running_var.mutable_data();
      for (int64_t i = 0; i < c; ++i) {
        rm[i] = (T(1) - momentum) * rm[i] + momentum * stat_mean[i];
        rv[i] = (T(1) - momentum) * rv[i] + momentum * stat_var[i];
      }
    }
  } else {
    stat_mean.assign(running_mean.data().begin(), running_mean.data().end());
    stat_var.assign(running_var.data().begin(), running_var.data().end());
  }

  std::vector<T> out(static_cast<size_t>(input.size()));
  kernels::bn_apply(input.data().data(), gamma.data().data(),
                    beta.data().data(), stat_mean.data(), stat_var.data(), eps,
                    out.data(), n, c, hw);

  auto* nx = input.node();
  auto* ng = gamma.node();
  auto* nb = beta.node();
  const bool train = mode == BnMode::train;
  auto bp = [nx, ng, nb, n, c, hw, eps, train, sm = std::move(stat_mean),
             sv = std::move(stat_var)](Node<T>& self) mutable {
    std::vector<T> scratch_dx, scratch_dg, scratch_db;
    T* dx = nullptr;
    if (nx->requires_grad) {
      dx = nx->grad.data();
    } else {
      scratch_dx.assign(self.value.size(), T(0));
      dx = scratch_dx.data();
    }
    T* dg = nullptr;
    if (ng->requires_grad) {
      dg = ng->grad.data();
    } else {
      scratch_dg.assign(static_cast<size_t>(c), T(0));
      dg = scratch_dg.data();
    }
    T* db = nullptr;
    if (nb->requires_grad) {
      db = nb->grad.data();
    } else {
      scratch_db.assign(static_cast<size_t>(c), T(0));
      db = scratch_db.data();
    }
    if (train)
      kernels::bn_backward_train(nx->value.data(), self.grad.data(),
                                 ng->value.data(), sm.data(), sv.data(), eps,
                                 dx, dg, db, n, c, hw);
    else
      kernels::bn_backward_eval(nx->value.data(), self.grad.data(),
                                ng->value.data(), sm.data(), sv.data(), eps,
                                dx, dg, db, n, c, hw);
  };
  return make_node<T>(input.shape(), std::move(out), {input, gamma, beta},
                      std::move(bp));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(static_cast<size_t>(a.size()));
  kernels::relu_forward(a.data().data(), a.size(), out.data());
  auto* na = a.node();
  return make_node<T>(a.shape(), std::move(out), {a}, [na](Node<T>& self) {
    if (na->requires_grad)
      kernels::relu_backward(na->value.data(), self.grad.data(), self.size(),
                             na->grad.data());
  });
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& a, int64_t k, int64_t stride) {
  check<ShapeError>(a.shape().size() == 4, "avg_pool2d: input must be NCHW");
  check<ConfigError>(k >= 1 && stride >= 1, "avg_pool2d: bad window ", k,
                     " stride ", stride);
  const int64_t n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  check<ShapeError>(k <= h && k <= w, "avg_pool2d: window exceeds input");
  const int64_t oh = (h - k) / stride + 1;
  const int64_t ow = (w - k) / stride + 1;
  std::vector<T> out(static_cast<size_t>(n * c * oh * ow));
  kernels::avgpool2d_forward(a.data().data(), n, c, h, w, k, stride,
                             out.data(), oh, ow);
  auto* na = a.node();
  return make_node<T>({n, c, oh, ow}, std::move(out), {a},
                      [na, n, c, h, w, k, stride, oh, ow](Node<T>& self) {
                        if (!na->requires_grad) return;
                        kernels::avgpool2d_backward(self.grad.data(), n, c, h,
                                                    w, k, stride,
                                                    na->grad.data(), oh, ow);
                      });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& a) {
  check<ShapeError>(a.shape().size() == 4, "global_avg_pool: input must be NCHW");
  const int64_t n = a.dim(0), c = a.dim(1), hw = a.dim(2) * a.dim(3);
  std::vector<T> out(static_cast<size_t>(n * c));
  kernels::global_avgpool_forward(a.data().data(), n, c, hw, out.data());
  auto* na = a.node();
  return make_node<T>({n, c}, std::move(out), {a},
                      [na, n, c, hw](Node<T>& self) {
                        if (!na->requires_grad) return;
                        kernels::global_avgpool_backward(
                            self.grad.data(), n, c, hw, na->grad.data());
                      });
}

template <typename T>
std::vector<T> gaussian_kernel_1d(int64_t kernel_size, T sigma) {
  check<ConfigError>(kernel_size >= 1 && kernel_size % 2 == 1,
                     "gaussian kernel size must be odd, got ", kernel_size);
  check<ConfigError>(sigma > T(0), "gaussian sigma must be > 0, got ", sigma);
  std::vector<T> k(static_cast<size_t>(kernel_size));
  const int64_t r = kernel_size / 2;
  double total = 0.0;
  for (int64_t i = 0; i < kernel_size; ++i) {
    double d = static_cast<double>(i - r);
    double v = std::exp(-0.5 * d * d / (static_cast<double>(sigma) * sigma));
    k[i] = static_cast<T>(v);
    total += v;
  }
  for (auto& v : k) v = static_cast<T>(v / total);
  return k;
}

template <typename T>
Tensor<T> gaussian_smooth(const Tensor<T>& a, int64_t kernel_size, T sigma) {
  check<ShapeError>(a.shape().size() == 4, "gaussian_smooth: input must be NCHW");
  auto k1d = gaussian_kernel_1d(kernel_size, sigma);
  const int64_t n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  check<ShapeError>(kernel_size / 2 < h && kernel_size / 2 < w,
                    "gaussian_smooth: kernel too large for image");
  std::vector<T> out(static_cast<size_t>(a.size()));
  kernels::smooth_forward(a.data().data(), n, c, h, w, k1d.data(), kernel_size,
                          out.data());
  auto* na = a.node();
  return make_node<T>(a.shape(), std::move(out), {a},
                      [na, n, c, h, w, k1d, kernel_size](Node<T>& self) {
                        if (!na->requires_grad) return;
                        kernels::smooth_backward(self.grad.data(), n, c, h, w,
                                                 k1d.data(), kernel_size,
                                                 na->grad.data());
                      });
}

// ---------------------------------------------------------- channel moments

template <typename T>
Tensor<T> channel_mean(const Tensor<T>& a) {
  check<ShapeError>(a.shape().size() == 4, "channel_mean: input must be NCHW");
  const int64_t n = a.dim(0), c = a.dim(1), hw = a.dim(2) * a.dim(3);
  std::vector<T> m(static_cast<size_t>(c)), v(static_cast<size_t>(c));
  kernels::channel_moments(a.data().data(), n, c, hw, m.data(), v.data());
  auto* na = a.node();
  return make_node<T>({c}, std::move(m), {a}, [na, n, c, hw](Node<T>& self) {
    if (!na->requires_grad) return;
    kernels::channel_mean_backward(self.grad.data(), n, c, hw, na->grad.data());
  });
}

template <typename T>
Tensor<T> channel_var(const Tensor<T>& a) {
  check<ShapeError>(a.shape().size() == 4, "channel_var: input must be NCHW");
  const int64_t n = a.dim(0), c = a.dim(1), hw = a.dim(2) * a.dim(3);
  std::vector<T> m(static_cast<size_t>(c)), v(static_cast<size_t>(c));
  kernels::channel_moments(a.data().data(), n, c, hw, m.data(), v.data());
  auto* na = a.node();
  return make_node<T>({c}, std::move(v), {a},
                      [na, n, c, hw, m = std::move(m)](Node<T>& self) {
                        if (!na->requires_grad) return;
                        kernels::channel_var_backward(self.grad.data(),
                                                      na->value.data(),
                                                      m.data(), n, c, hw,
                                                      na->grad.data());
                      });
}

// ------------------------------------------------------------- quantization

template <typename T>
Tensor<T> fake_quant(const Tensor<T>& x, T scale, int zero_point, int qmin,
                     int qmax, bool ste) {
  check<ConfigError>(scale > T(0), "fake_quant: scale must be > 0, got ", scale);
  check<ConfigError>(zero_point >= qmin && zero_point <= qmax,
                     "fake_quant: zero point ", zero_point,
                     " outside [", qmin, ",", qmax, "]");
  const int64_t n = x.size();
  std::vector<T> out(static_cast<size_t>(n));
  std::vector<uint8_t> mask;
  uint8_t* mp = nullptr;
  const bool need_mask = ste && GradMode::enabled() && x.requires_grad();
  if (need_mask) {
    mask.resize(static_cast<size_t>(n));
    mp = mask.data();
  }
  kernels::fake_quant_pertensor(x.data().data(), n, scale, zero_point, qmin,
                                qmax, out.data(), mp);
  if (!need_mask)
    return make_node<T>(x.shape(), std::move(out), {}, nullptr);
  auto* nx = x.node();
  return make_node<T>(x.shape(), std::move(out), {x},
                      [nx, mask = std::move(mask)](Node<T>& self) {
                        if (!nx->requires_grad) return;
                        for (int64_t i = 0; i < self.size(); ++i)
                          if (mask[i]) nx->grad[i] += self.grad[i];
                      });
}

template <typename T>
Tensor<T> fake_quant_per_channel(const Tensor<T>& x,
                                 const std::vector<T>& scales, int qmin,
                                 int qmax, bool ste) {
  check<ShapeError>(!x.shape().empty() &&
                        x.dim(0) == static_cast<int64_t>(scales.size()),
                    "fake_quant_per_channel: ", scales.size(),
                    " scales for leading dim ", x.dim(0));
  for (T s : scales)
    check<ConfigError>(s > T(0), "fake_quant_per_channel: non-positive scale");
  const int64_t c = x.dim(0);
  const int64_t stride = x.size() / c;
  std::vector<T> out(static_cast<size_t>(x.size()));
  std::vector<uint8_t> mask;
  uint8_t* mp = nullptr;
  const bool need_mask = ste && GradMode::enabled() && x.requires_grad();
  if (need_mask) {
    mask.resize(static_cast<size_t>(x.size()));
    mp = mask.data();
  }
  kernels::fake_quant_perchannel(x.data().data(), c, stride, scales.data(),
                                 qmin, qmax, out.data(), mp);
  if (!need_mask)
    return make_node<T>(x.shape(), std::move(out), {}, nullptr);
  auto* nx = x.node();
  return make_node<T>(x.shape(), std::move(out), {x},
                      [nx, mask = std::move(mask)](Node<T>& self) {
                        if (!nx->requires_grad) return;
                        for (int64_t i = 0; i < self.size(); ++i)
                          if (mask[i]) nx->grad[i] += self.grad[i];
                      });
}

// ------------------------------------------------------------------- losses

template <typename T>
Tensor<T> loss_smooth_l1(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "loss_smooth_l1");
  const int64_t n = a.size();
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    double ad = std::abs(d);
    acc += ad < 1.0 ? 0.5 * d * d : ad - 0.5;
  }
  const T value = static_cast<T>(acc / static_cast<double>(n));
  auto* na = a.node();
  auto* nb = b.node();
  return make_node<T>({1}, {value}, {a, b}, [na, nb, n](Node<T>& self) {
    const T g = self.grad[0] / static_cast<T>(n);
    for (int64_t i = 0; i < n; ++i) {
      T d = na->value[i] - nb->value[i];
      T gd = g * std::clamp(d, T(-1), T(1));
      if (na->requires_grad) na->grad[i] += gd;
      if (nb->requires_grad) nb->grad[i] -= gd;
    }
  });
}

template <typename T>
Tensor<T> loss_kd_kl(const Tensor<T>& teacher_logits,
                     const Tensor<T>& student_logits) {
  check_same_shape(teacher_logits, student_logits, "loss_kd_kl");
  check<ShapeError>(teacher_logits.shape().size() == 2,
                    "loss_kd_kl: logits must be NxK");
  const int64_t n = teacher_logits.dim(0), k = teacher_logits.dim(1);
  std::vector<T> pt(static_cast<size_t>(n * k)), ps(static_cast<size_t>(n * k));
  softmax_rows<T>(teacher_logits.data(), n, k, {pt.data(), pt.size()});
  softmax_rows<T>(student_logits.data(), n, k, {ps.data(), ps.size()});
  double acc = 0.0;
  for (int64_t i = 0; i < n * k; ++i) {
    double p = pt[i];
    if (p > 0.0)
      acc += p * (std::log(p) - std::log(std::max<double>(ps[i], 1e-300)));
  }
  const T value = static_cast<T>(acc / static_cast<double>(n));
  auto* ns = student_logits.node();
  return make_node<T>(
      {1}, {value}, {student_logits},
      [ns, n, pt = std::move(pt), ps = std::move(ps)](Node<T>& self) {
        if (!ns->requires_grad) return;
        const T g = self.grad[0] / static_cast<T>(n);
        for (size_t i = 0; i < pt.size(); ++i)
          ns->grad[i] += g * (ps[i] - pt[i]);
      });
}

template <typename T>
Tensor<T> loss_inception(const Tensor<T>& logits,
                         const std::vector<int64_t>& targets, T scale) {
  check<ConfigError>(scale > T(0), "loss_inception: scale must be > 0, got ",
                     scale);
  check<ShapeError>(logits.shape().size() == 2, "loss_inception: logits NxK");
  const int64_t n = logits.dim(0), k = logits.dim(1);
  check<ShapeError>(static_cast<int64_t>(targets.size()) == n,
                    "loss_inception: ", targets.size(), " targets for batch ",
                    n);
  std::vector<T> e(static_cast<size_t>(n));
  double acc = 0.0;
  const T* pl = logits.data().data();
  for (int64_t i = 0; i < n; ++i) {
    check<ConfigError>(targets[i] >= 0 && targets[i] < k,
                       "loss_inception: target out of range");
    e[i] = std::exp(-pl[i * k + targets[i]] / scale);
    acc += e[i];
  }
  const T value = static_cast<T>(acc / static_cast<double>(n));
  auto* nl = logits.node();
  return make_node<T>({1}, {value}, {logits},
                      [nl, n, k, scale, targets, e = std::move(e)](Node<T>& self) {
                        if (!nl->requires_grad) return;
                        const T g = self.grad[0] / static_cast<T>(n);
                        for (int64_t i = 0; i < n; ++i)
                          nl->grad[i * k + targets[i]] -= g * e[i] / scale;
                      });
}

template <typename T>
Tensor<T> loss_cross_entropy(const Tensor<T>& logits,
                             const std::vector<int64_t>& labels) {
  check<ShapeError>(logits.shape().size() == 2, "loss_cross_entropy: logits NxK");
  const int64_t n = logits.dim(0), k = logits.dim(1);
  check<ShapeError>(static_cast<int64_t>(labels.size()) == n,
                    "loss_cross_entropy: ", labels.size(), " labels for batch ",
                    n);
  std::vector<T> p(static_cast<size_t>(n * k));
  softmax_rows<T>(logits.data(), n, k, {p.data(), p.size()});
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    check<DataError>(labels[i] >= 0 && labels[i] < k,
                     "loss_cross_entropy: label out of range");
    acc -= std::log(std::max<double>(p[i * k + labels[i]], 1e-300));
  }
  const T value = static_cast<T>(acc / static_cast<double>(n));
  auto* nl = logits.node();
  return make_node<T>({1}, {value}, {logits},
                      [nl, n, k, labels, p = std::move(p)](Node<T>& self) {
                        if (!nl->requires_grad) return;
                        const T g = self.grad[0] / static_cast<T>(n);
                        for (int64_t i = 0; i < n; ++i)
                          for (int64_t j = 0; j < k; ++j)
                            nl->grad[i * k + j] +=
                                g * (p[i * k + j] -
                                     (j == labels[i] ? T(1) : T(0)));
                      });
}

template <typename T>
Tensor<T> loss_mse(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "loss_mse");
  const int64_t n = a.size();
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    acc += d * d;
  }
  const T value = static_cast<T>(acc / static_cast<double>(n));
  auto* na = a.node();
  auto* nb = b.node();
  return make_node<T>({1}, {value}, {a, b}, [na, nb, n](Node<T>& self) {
    const T g = self.grad[0] * T(2) / static_cast<T>(n);
    for (int64_t i = 0; i < n; ++i) {
      T gd = g * (na->value[i] - nb->value[i]);
      if (na->requires_grad) na->grad[i] += gd;
      if (nb->requires_grad) nb->grad[i] -= gd;
    }
  });
}

// -------------------------------------------------------- batch transforms

template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& a) {
  check<ShapeError>(a.shape().size() == 4, "flip_horizontal: input must be NCHW");
  const int64_t planes = a.dim(0) * a.dim(1) * a.dim(2), w = a.dim(3);
  std::vector<T> out(static_cast<size_t>(a.size()));
  const T* px = a.data().data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < planes; ++i)
    for (int64_t j = 0; j < w; ++j) out[i * w + j] = px[i * w + (w - 1 - j)];
  auto* na = a.node();
  return make_node<T>(a.shape(), std::move(out), {a},
                      [na, planes, w](Node<T>& self) {
                        if (!na->requires_grad) return;
                        for (int64_t i = 0; i < planes; ++i)
                          for (int64_t j = 0; j < w; ++j)
                            na->grad[i * w + (w - 1 - j)] +=
                                self.grad[i * w + j];
                      });
}

template <typename T>
Tensor<T> crop_resize(const Tensor<T>& a, const std::vector<CropBox>& boxes) {
  check<ShapeError>(a.shape().size() == 4, "crop_resize: input must be NCHW");
  const int64_t n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  check<ShapeError>(static_cast<int64_t>(boxes.size()) == n, "crop_resize: ",
                    boxes.size(), " boxes for batch ", n);
  std::vector<T> out(static_cast<size_t>(a.size()));
  const T* px = a.data().data();

  // Precompute per-sample, per-output-pixel source taps and weights.
  struct Tap {
    int64_t y0, x0;
    T wy, wx;  // weight of the (y0,x0) corner along each axis
  };
  std::vector<Tap> taps(static_cast<size_t>(n * h * w));
  for (int64_t i = 0; i < n; ++i) {
    const auto& b = boxes[i];
    const double sy = b.h / static_cast<double>(h);
    const double sx = b.w / static_cast<double>(w);
    for (int64_t oy = 0; oy < h; ++oy)
      for (int64_t ox = 0; ox < w; ++ox) {
        double fy = b.y0 + (oy + 0.5) * sy - 0.5;
        double fx = b.x0 + (ox + 0.5) * sx - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
        fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
        int64_t y0 = std::min<int64_t>(static_cast<int64_t>(fy), h - 2 >= 0 ? h - 2 : 0);
        int64_t x0 = std::min<int64_t>(static_cast<int64_t>(fx), w - 2 >= 0 ? w - 2 : 0);
        Tap& t = taps[static_cast<size_t>((i * h + oy) * w + ox)];
        t.y0 = y0;
        t.x0 = x0;
        t.wy = static_cast<T>(1.0 - (fy - static_cast<double>(y0)));
        t.wx = static_cast<T>(1.0 - (fx - static_cast<double>(x0)));
      }
  }

#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* plane = px + (i * c + ch) * h * w;
      T* o = out.data() + (i * c + ch) * h * w;
      const Tap* ts = taps.data() + i * h * w;
      for (int64_t p = 0; p < h * w; ++p) {
        const Tap& t = ts[p];
        const T* r0 = plane + t.y0 * w + t.x0;
        const T* r1 = r0 + w;
        o[p] = t.wy * (t.wx * r0[0] + (T(1) - t.wx) * r0[1]) +
               (T(1) - t.wy) * (t.wx * r1[0] + (T(1) - t.wx) * r1[1]);
      }
    }

  auto* na = a.node();
  return make_node<T>(a.shape(), std::move(out), {a},
                      [na, n, c, h, w, taps = std::move(taps)](Node<T>& self) {
                        if (!na->requires_grad) return;
                        for (int64_t i = 0; i < n; ++i)
                          for (int64_t ch = 0; ch < c; ++ch) {
                            T* d = na->grad.data() + (i * c + ch) * h * w;
                            const T* g = self.grad.data() + (i * c + ch) * h * w;
                            const Tap* ts = taps.data() + i * h * w;
                            for (int64_t p = 0; p < h * w; ++p) {
                              const Tap& t = ts[p];
                              T* r0 = d + t.y0 * w + t.x0;
                              T* r1 = r0 + w;
                              const T gv = g[p];
                              r0[0] += gv * t.wy * t.wx;
                              r0[1] += gv * t.wy * (T(1) - t.wx);
                              r1[0] += gv * (T(1) - t.wy) * t.wx;
                              r1[1] += gv * (T(1) - t.wy) * (T(1) - t.wx);
                            }
                          }
                      });
}

template <typename T>
Tensor<T> mul_spatial_mask(const Tensor<T>& a, const std::vector<T>& mask) {
  check<ShapeError>(a.shape().size() == 4, "mul_spatial_mask: input must be NCHW");
  const int64_t n = a.dim(0), c = a.dim(1), hw = a.dim(2) * a.dim(3);
  check<ShapeError>(static_cast<int64_t>(mask.size()) == n * hw,
                    "mul_spatial_mask: mask size ", mask.size(), " expected ",
                    n * hw);
  std::vector<T> out(static_cast<size_t>(a.size()));
  const T* px = a.data().data();
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* plane = px + (i * c + ch) * hw;
      const T* m = mask.data() + i * hw;
      T* o = out.data() + (i * c + ch) * hw;
#pragma omp simd
      for (int64_t j = 0; j < hw; ++j) o[j] = plane[j] * m[j];
    }
  auto* na = a.node();
  return make_node<T>(a.shape(), std::move(out), {a},
                      [na, n, c, hw, mask](Node<T>& self) {
                        if (!na->requires_grad) return;
                        for (int64_t i = 0; i < n; ++i)
                          for (int64_t ch = 0; ch < c; ++ch) {
                            T* d = na->grad.data() + (i * c + ch) * hw;
                            const T* g = self.grad.data() + (i * c + ch) * hw;
                            const T* m = mask.data() + i * hw;
                            for (int64_t j = 0; j < hw; ++j)
                              d[j] += g[j] * m[j];
                          }
                      });
}

// ------------------------------------------------------------ plain helpers

template <typename T>
void softmax_rows(std::span<const T> logits, int64_t rows, int64_t cols,
                  std::span<T> out) {
  check<ShapeError>(static_cast<int64_t>(logits.size()) == rows * cols &&
                        out.size() == logits.size(),
                    "softmax_rows: size mismatch");
  for (int64_t i = 0; i < rows; ++i) {
    const T* in = logits.data() + i * cols;
    T* o = out.data() + i * cols;
    T mx = in[0];
    for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    double total = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      double e = std::exp(static_cast<double>(in[j] - mx));
      o[j] = static_cast<T>(e);
      total += e;
    }
    const T inv = static_cast<T>(1.0 / total);
    for (int64_t j = 0; j < cols; ++j) o[j] *= inv;
  }
}

template <typename T>
std::vector<int64_t> argmax_rows(const Tensor<T>& logits) {
  check<ShapeError>(logits.shape().size() == 2, "argmax_rows: input NxK");
  const int64_t n = logits.dim(0), k = logits.dim(1);
  const T* p = logits.data().data();
  std::vector<int64_t> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    int64_t best = 0;
    for (int64_t j = 1; j < k; ++j)
      if (p[i * k + j] > p[i * k + best]) best = j;
    out[i] = best;
  }
  return out;
}

// ------------------------------------------------------------ instantiation

#define DFKD_OPS_INSTANTIATE(T)                                               \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                      \
  template Tensor<T> mul_scalar<T>(const Tensor<T>&, T);                      \
  template Tensor<T> exp<T>(const Tensor<T>&);                                \
  template Tensor<T> log<T>(const Tensor<T>&);                                \
  template Tensor<T> sqrt<T>(const Tensor<T>&);                               \
  template Tensor<T> sum<T>(const Tensor<T>&);                                \
  template Tensor<T> mean<T>(const Tensor<T>&);                               \
  template Tensor<T> reshape<T>(const Tensor<T>&, const Shape&);              \
  template Tensor<T> flatten<T>(const Tensor<T>&);                            \
  template Tensor<T> concat0<T>(const std::vector<Tensor<T>>&);               \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&,            \
                               const std::optional<Tensor<T>>&, int64_t,      \
                               int64_t);                                      \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&,            \
                               const std::optional<Tensor<T>>&);              \
  template Tensor<T> batch_norm<T>(const Tensor<T>&, const Tensor<T>&,        \
                                   const Tensor<T>&, Tensor<T>&, Tensor<T>&,  \
                                   BnMode, T, T, bool);                       \
  template Tensor<T> relu<T>(const Tensor<T>&);                               \
  template Tensor<T> avg_pool2d<T>(const Tensor<T>&, int64_t, int64_t);       \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                    \
  template std::vector<T> gaussian_kernel_1d<T>(int64_t, T);                  \
  template Tensor<T> gaussian_smooth<T>(const Tensor<T>&, int64_t, T);        \
  template Tensor<T> channel_mean<T>(const Tensor<T>&);                       \
  template Tensor<T> channel_var<T>(const Tensor<T>&);                        \
  template Tensor<T> fake_quant<T>(const Tensor<T>&, T, int, int, int, bool); \
  template Tensor<T> fake_quant_per_channel<T>(const Tensor<T>&,              \
                                               const std::vector<T>&, int,    \
                                               int, bool);                    \
  template Tensor<T> loss_smooth_l1<T>(const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> loss_kd_kl<T>(const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> loss_inception<T>(const Tensor<T>&,                      \
                                       const std::vector<int64_t>&, T);       \
  template Tensor<T> loss_cross_entropy<T>(const Tensor<T>&,                  \
                                           const std::vector<int64_t>&);      \
  template Tensor<T> loss_mse<T>(const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> flip_horizontal<T>(const Tensor<T>&);                    \
  template Tensor<T> crop_resize<T>(const Tensor<T>&,                         \
                                    const std::vector<CropBox>&);             \
  template Tensor<T> mul_spatial_mask<T>(const Tensor<T>&,                    \
                                         const std::vector<T>&);              \
  template void softmax_rows<T>(std::span<const T>, int64_t, int64_t,         \
                                std::span<T>);                                \
  template std::vector<int64_t> argmax_rows<T>(const Tensor<T>&);

DFKD_OPS_INSTANTIATE(float)
DFKD_OPS_INSTANTIATE(double)

#undef DFKD_OPS_INSTANTIATE

}  // namespace dfkd
