#pragma once

#include <cstddef>
#include <vector>

#include "fd/layers.hpp"
#include "fd/tensor.hpp"

namespace fd::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction; one (m, v) pair per parameter tensor.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig cfg = {});
  void step();
  std::size_t t() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> m_, v_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
};

}  // namespace fd::nn
