#pragma once

#include <cstddef>
#include <vector>

#include "edgeorch/autodiff.hpp"

namespace edgeorch::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables clipping
};

class Adam {
 public:
  Adam(ParamStore& params, AdamConfig cfg);

  // Applies one update from the accumulated gradients, then zeroes them.
  void step();
  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  ParamStore* params_;
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t t_ = 0;
};

}  // namespace edgeorch::nn
