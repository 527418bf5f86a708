#pragma once

// Central-difference gradient verification for the autodiff engine (double precision).

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "snz/tensor.hpp"

namespace snz {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "input[i][j]" of the worst element
  Eigen::Index checked = 0;
};

struct GradcheckOptions {
  double step = 1e-5;
  // Denominator floor: rel = |a - n| / max(|a|, |n|, floor).
  double floor = 1e-3;
  // Per-input element budget; larger inputs are checked at evenly spaced indices.
  Eigen::Index max_elements = 0;
};

/// `loss` must rebuild the graph from `inputs` on every call and be deterministic.
inline GradcheckResult gradcheck(const std::function<Tensor<double>()>& loss, std::vector<Tensor<double>> inputs,
                                 GradcheckOptions opt = {}) {
  for (auto& in : inputs) in.zero_grad();
  backward(loss());
  std::vector<Eigen::VectorXd> analytic;
  for (auto& in : inputs) analytic.push_back(in.grad());

  GradcheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& x = inputs[k].value();
    const Eigen::Index n = x.size();
    const Eigen::Index count = opt.max_elements > 0 ? std::min(n, opt.max_elements) : n;
    for (Eigen::Index c = 0; c < count; ++c) {
      const Eigen::Index i = count == n ? c : (c * n) / count;
      const double saved = x[i];
      double lp, lm;
      {
        NoGradGuard guard;
        x[i] = saved + opt.step;
        lp = loss().item();
        x[i] = saved - opt.step;
        lm = loss().item();
      }
      x[i] = saved;
      const double numeric = (lp - lm) / (2 * opt.step);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.floor});
      ++result.checked;
      if (rel > result.max_rel_error || std::isnan(rel)) {
        result.max_rel_error = std::isnan(rel) ? INFINITY : rel;
        result.worst = "input[" + std::to_string(k) + "][" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace snz
