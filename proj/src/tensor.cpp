#include "dfkd/tensor.hpp"

#include <cmath>
#include <unordered_set>

namespace dfkd {

namespace {
thread_local bool g_grad_enabled = true;
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set(bool on) { g_grad_enabled = on; }

template <typename T>
void Tensor<T>::backward() const {
  check<UsageError>(defined(), "backward() on undefined tensor");
  check<UsageError>(size() == 1, "backward root must be scalar, got shape ",
                    to_string(shape()));

  // Post-order DFS over recorded parents; the recorded graph is acyclic by
  // construction (define-by-run).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior gradients are per-pass scratch; leaves keep accumulating.
  for (Node* n : order) {
    if (n->backprop) {
      n->grad.assign(n->value.size(), T(0));
    } else {
      n->ensure_grad();
    }
  }
  node_->ensure_grad();
  node_->grad[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

template <typename T>
void ensure_finite(const Tensor<T>& t, const std::string& what) {
  for (T v : t.data())
    if (!std::isfinite(v))
      fail<NumericError>(what, " contains a non-finite value");
}

template class Tensor<float>;
template class Tensor<double>;
template void ensure_finite<float>(const Tensor<float>&, const std::string&);
template void ensure_finite<double>(const Tensor<double>&, const std::string&);

}  // namespace dfkd
