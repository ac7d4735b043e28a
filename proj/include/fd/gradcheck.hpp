#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fd/models.hpp"

namespace fd::gradcheck {

struct Result {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  bool pass = false;
};

struct Options {
  double step = 1e-5;
  double tolerance = 1e-6;
  // Near-zero gradients make a pure ratio meaningless; the denominator is
  // floored at this value.
  double denom_floor = 1e-3;
  std::size_t samples_per_tensor = 4;
  std::uint64_t sample_seed = 17;
  double kl_coeff = 1e-3;  // applied when the network has variational layers
};

// Central finite differences on the training loss (cross-entropy plus any
// layer regularizer) of one learner, at a fixed stochastic pass (the RNG is
// reseeded identically for every evaluation). Perturbs a seeded sample of
// entries in every parameter tensor.
Result check_learner(nn::Network& net, const Tensor& x,
                     const std::vector<std::size_t>& labels, std::uint64_t pass_seed,
                     const Options& opts, const std::string& name);

// Runs check_learner over every learner of a model on a random batch.
std::vector<Result> check_model(models::Model& model, std::size_t batch,
                                std::uint64_t data_seed, const Options& opts);

}  // namespace fd::gradcheck
