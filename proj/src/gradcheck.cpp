#include "dfkd/gradcheck.hpp"

#include <cmath>

namespace dfkd {

GradCheckReport grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& fn,
    std::vector<Tensor<double>> inputs, double h) {
  for (auto& in : inputs) in.set_requires_grad(true);

  // Analytic gradients.
  for (auto& in : inputs) in.zero_grad();
  Tensor<double> out = fn(inputs);
  check<UsageError>(out.size() == 1, "grad_check: function must return a scalar");
  out.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& in : inputs) {
    auto g = in.mutable_grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  GradCheckReport report;
  NoGradGuard ng;
  for (size_t k = 0; k < inputs.size(); ++k) {
    auto vals = inputs[k].mutable_data();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + h;
      const double fp = fn(inputs).item();
      vals[i] = orig - h;
      const double fm = fn(inputs).item();
      vals[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[k][i];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = strcat("input ", k, " element ", i, ": analytic ", a,
                              " numeric ", numeric);
      }
    }
  }
  return report;
}

}  // namespace dfkd
