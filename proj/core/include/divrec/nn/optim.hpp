#pragma once

#include <cstddef>
#include <vector>

#include "divrec/nn/layers.hpp"

namespace divrec::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  // true: AdamW (decay applied to the parameter), false: L2 added to the gradient.
  bool decoupled = false;
};

class Adam {
 public:
  Adam() = default;
  Adam(ParamList params, AdamConfig cfg);

  // Reads each parameter's accumulated gradient. A non-finite gradient aborts
  // the whole step before any parameter changes (NumericError names it).
  void step();
  void zero_grad();

  const ParamList& params() const { return params_; }
  AdamConfig& config() { return cfg_; }
  const AdamConfig& config() const { return cfg_; }
  std::size_t steps() const { return t_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void set_steps(std::size_t t) { t_ = t; }

 private:
  ParamList params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace divrec::nn
