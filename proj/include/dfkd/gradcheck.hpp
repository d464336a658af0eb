#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dfkd/tensor.hpp"

namespace dfkd {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;  // "input/element" of the worst disagreement
  bool pass(double tol) const { return max_rel_err < tol; }
};

// Compares analytic gradients of a scalar-valued function against central
// finite differences, element by element, at the given point. Runs in
// 64-bit; relative error uses the denominator max(1, |analytic|, |numeric|).
GradCheckReport grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& fn,
    std::vector<Tensor<double>> inputs, double h = 1e-5);

}  // namespace dfkd
