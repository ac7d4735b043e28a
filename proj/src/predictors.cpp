#include "fd/predictors.hpp"

#include <atomic>

#include "fd/errors.hpp"

namespace fd::predictors {

namespace {
std::atomic<std::size_t> g_pass_count{0};
}

std::size_t forward_pass_count() { return g_pass_count.load(); }
void reset_forward_pass_count() { g_pass_count.store(0); }

Kind kind_for_arch(models::ArchId arch) {
  switch (arch) {
    case models::ArchId::ConvLstmD: return Kind::McDropout;
    case models::ArchId::Bnn: return Kind::Bnn;
    case models::ArchId::De1:
    case models::ArchId::De2: return Kind::Ensemble;
  }
  return Kind::McDropout;
}

PredictorConfig default_config(models::ArchId arch, std::uint64_t seed) {
  PredictorConfig cfg;
  cfg.kind = kind_for_arch(arch);
  cfg.K = cfg.kind == Kind::Ensemble ? 4 : 10;
  cfg.seed = seed;
  return cfg;
}

PredictionMatrix predict_dist(models::Model& model, const PredictorConfig& cfg,
                              const signal::Burst& burst, std::size_t example_index) {
  if (cfg.K < 1) throw InvalidSpec("K must be >= 1");
  if (burst.values.size() != model.spec.input_len)
    throw ShapeMismatch("burst length does not match model input");
  if (cfg.kind == Kind::Ensemble && cfg.K != model.learner_count())
    throw InvalidSpec("ensemble K must equal learner count");

  const std::size_t c = model.spec.num_classes;
  PredictionMatrix out;
  out.K = cfg.K;
  out.C = c;
  out.probs = Tensor({cfg.K, c});

  std::vector<const signal::Burst*> batch{&burst};
  for (std::size_t k = 0; k < cfg.K; ++k) {
    Rng rng = Rng::derive(cfg.seed, {example_index, k});
    Tensor row;
    switch (cfg.kind) {
      case Kind::McDropout:
        row = models::forward_bursts(model.learners[0], batch, nn::Mode::McInference, rng);
        break;
      case Kind::Bnn:
        // Stochasticity comes from fresh posterior weight samples; dropout off.
        row = models::forward_bursts(model.learners[0], batch, nn::Mode::Inference, rng);
        break;
      case Kind::Ensemble:
        row = models::forward_bursts(model.learners[k], batch, nn::Mode::Inference, rng);
        break;
    }
    ++g_pass_count;
    for (std::size_t j = 0; j < c; ++j) out.probs.at2(k, j) = row.at2(0, j);
  }
  return out;
}

std::vector<double> mean_dist(const PredictionMatrix& m) {
  std::vector<double> mean(m.C, 0.0);
  for (std::size_t k = 0; k < m.K; ++k)
    for (std::size_t j = 0; j < m.C; ++j) mean[j] += m.probs.at2(k, j);
  for (double& v : mean) v /= static_cast<double>(m.K);
  return mean;
}

}  // namespace fd::predictors
