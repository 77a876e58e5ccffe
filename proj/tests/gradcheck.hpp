#pragma once

// Central finite-difference oracle for analytic gradients. Test-only: it
// only evaluates the loss closure and never looks at backward internals.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "divrec/nn/layers.hpp"
#include "divrec/nn/tensor.hpp"

namespace divrec::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};

// Relative error per parameter tensor: ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-5),
// over up to `max_per_tensor` randomly chosen coordinates.
inline GradCheckResult grad_check(const std::function<nn::Tensor()>& loss_fn,
                                  const nn::ParamList& params, double step = 1e-5,
                                  std::size_t max_per_tensor = 24, unsigned seed = 7) {
  nn::zero_grads(params);
  nn::backward(loss_fn());

  GradCheckResult result;
  std::mt19937 pick(seed);
  for (const auto& p : params) {
    nn::Tensor t = p.tensor;
    const auto grad = std::vector<double>(t.grad().begin(), t.grad().end());
    std::vector<std::size_t> coords(t.numel());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    std::shuffle(coords.begin(), coords.end(), pick);
    coords.resize(std::min(coords.size(), max_per_tensor));

    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (auto i : coords) {
      auto w = t.mutable_values();
      const double saved = w[i];
      double up = 0.0, down = 0.0;
      {
        nn::NoGradGuard guard;
        w[i] = saved + step;
        up = loss_fn().item();
        w[i] = saved - step;
        down = loss_fn().item();
        w[i] = saved;
      }
      const double numeric = (up - down) / (2.0 * step);
      diff2 += (grad[i] - numeric) * (grad[i] - numeric);
      a2 += grad[i] * grad[i];
      n2 += numeric * numeric;
      ++result.checked;
    }
    const double denom = std::max(std::sqrt(a2) + std::sqrt(n2), 1e-5);
    const double rel = std::sqrt(diff2) / denom;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_param = p.name;
    }
  }
  return result;
}

}  // namespace divrec::testing
