#pragma once

#include <cstdint>
#include <vector>

#include "fd/models.hpp"
#include "fd/signal.hpp"
#include "fd/tensor.hpp"

namespace fd::predictors {

enum class Kind { McDropout, Bnn, Ensemble };

Kind kind_for_arch(models::ArchId arch);

struct PredictorConfig {
  Kind kind = Kind::McDropout;
  std::size_t K = 10;  // for Ensemble, K == learner count
  std::uint64_t seed = 0;
};

PredictorConfig default_config(models::ArchId arch, std::uint64_t seed);

struct PredictionMatrix {
  Tensor probs;  // [K, C], rows on the simplex
  std::size_t K = 0, C = 0;
};

// K per-example probability rows: MC dropout makes K stochastic passes with
// dropout live, BNN draws K posterior weight samples, an ensemble takes one
// pass per learner. Rows are deterministic given (seed, example_index).
PredictionMatrix predict_dist(models::Model& model, const PredictorConfig& cfg,
                              const signal::Burst& burst, std::size_t example_index);

// Column means of the prediction matrix; stays on the simplex.
std::vector<double> mean_dist(const PredictionMatrix& m);

// Forward-pass accounting (one count per learner pass over one example).
std::size_t forward_pass_count();
void reset_forward_pass_count();

}  // namespace fd::predictors
