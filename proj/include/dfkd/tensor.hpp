#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dfkd/common.hpp"
#include "dfkd/random.hpp"

namespace dfkd {

// Thread-local switch: with grad mode off, ops produce plain values and no
// graph is recorded (used for teacher forwards, evaluation, calibration).
class GradMode {
 public:
  static bool enabled();
  static void set(bool on);
};

struct NoGradGuard {
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
  ~NoGradGuard() { GradMode::set(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on demand
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates (+=) into the parents' grads.
  std::function<void(Node&)> backprop;

  int64_t size() const { return static_cast<int64_t>(value.size()); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

}  // namespace detail

// Dense n-d array with an optional gradient slot. Values are immutable once
// produced by an op; the only sanctioned in-place writes are leaf edits
// between graph executions (parameter updates, input projections).
template <typename T>
class Tensor {
 public:
  using Node = detail::Node<T>;

  Tensor() = default;

  static Tensor zeros(const Shape& s) {
    return from(s, std::vector<T>(static_cast<size_t>(numel(s)), T(0)));
  }
  static Tensor full(const Shape& s, T v) {
    return from(s, std::vector<T>(static_cast<size_t>(numel(s)), v));
  }
  static Tensor from(const Shape& s, std::vector<T> data) {
    check<ShapeError>(numel(s) == static_cast<int64_t>(data.size()),
                      "tensor data length ", data.size(),
                      " does not match shape ", to_string(s));
    auto n = std::make_shared<Node>();
    n->shape = s;
    n->value = std::move(data);
    return Tensor(std::move(n));
  }
  static Tensor scalar(T v) { return from({1}, {v}); }
  static Tensor randn(const Shape& s, Rng& rng, T mean = T(0), T stddev = T(1)) {
    std::vector<T> data(static_cast<size_t>(numel(s)));
    for (auto& v : data) v = static_cast<T>(rng.normal(mean, stddev));
    return from(s, std::move(data));
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t size() const { return node_->size(); }
  int64_t dim(size_t i) const { return node_->shape.at(i); }

  std::span<const T> data() const { return {node_->value.data(), node_->value.size()}; }
  std::span<T> mutable_data() { return {node_->value.data(), node_->value.size()}; }

  T item() const {
    check<UsageError>(size() == 1, "item() on non-scalar tensor ",
                      to_string(shape()));
    return node_->value[0];
  }
  T at(std::initializer_list<int64_t> idx) const {
    check<UsageError>(idx.size() == shape().size(), "index rank mismatch");
    int64_t flat = 0;
    size_t d = 0;
    for (int64_t i : idx) {
      check<UsageError>(i >= 0 && i < shape()[d], "index out of range");
      flat = flat * shape()[d] + i;
      ++d;
    }
    return node_->value[static_cast<size_t>(flat)];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b = true) {
    check<UsageError>(node_->parents.empty() || !b,
                      "requires_grad can only be toggled on leaf tensors");
    node_->requires_grad = b;
    return *this;
  }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<const T> grad() const {
    check<UsageError>(has_grad(), "tensor has no gradient");
    return {node_->grad.data(), node_->grad.size()};
  }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return {node_->grad.data(), node_->grad.size()};
  }
  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  // Reverse-mode accumulation from a scalar root. Interior gradients are
  // reset per call; leaf gradients accumulate across calls until zero_grad().
  void backward() const;

  // Leaf copy of the values, detached from any graph.
  Tensor detach() const {
    auto n = std::make_shared<Node>();
    n->shape = node_->shape;
    n->value = node_->value;
    return Tensor(std::move(n));
  }
  Tensor clone() const {
    Tensor t = detach();
    t.node_->requires_grad = node_->requires_grad && node_->parents.empty();
    return t;
  }

  Node* node() const { return node_.get(); }
  std::shared_ptr<Node> shared_node() const { return node_; }
  static Tensor adopt(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
};

// Throws NumericError when any element is NaN/Inf; `what` names the tensor
// in the message (used at loss/step boundaries).
template <typename T>
void ensure_finite(const Tensor<T>& t, const std::string& what);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template void ensure_finite<float>(const Tensor<float>&, const std::string&);
extern template void ensure_finite<double>(const Tensor<double>&, const std::string&);

}  // namespace dfkd
