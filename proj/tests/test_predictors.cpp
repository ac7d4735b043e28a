#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fd/errors.hpp"
#include "fd/models.hpp"
#include "fd/predictors.hpp"
#include "fd/signal.hpp"

namespace models = fd::models;
namespace pred = fd::predictors;
namespace sig = fd::signal;
namespace nn = fd::nn;
using fd::Rng;

namespace {

sig::Burst make_burst(std::size_t length, std::uint64_t seed) {
  sig::Burst b;
  b.values.resize(length);
  Rng rng(seed);
  for (double& v : b.values) v = rng.normal();
  return b;
}

models::Model built(models::ArchId arch, std::size_t input_len = 64) {
  models::ModelSpec spec;
  spec.arch = arch;
  spec.num_classes = 3;
  spec.input_len = input_len;
  spec.scale = 0.25;
  return models::build(spec, 71);
}

void check_rows_on_simplex(const pred::PredictionMatrix& m) {
  for (std::size_t k = 0; k < m.K; ++k) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.C; ++c) {
      CHECK(m.probs.at2(k, c) >= 0.0);
      CHECK(m.probs.at2(k, c) <= 1.0);
      s += m.probs.at2(k, c);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

}  // namespace

TEST_CASE("predictor kind follows the architecture") {
  CHECK(pred::kind_for_arch(models::ArchId::ConvLstmD) == pred::Kind::McDropout);
  CHECK(pred::kind_for_arch(models::ArchId::Bnn) == pred::Kind::Bnn);
  CHECK(pred::kind_for_arch(models::ArchId::De1) == pred::Kind::Ensemble);
  CHECK(pred::kind_for_arch(models::ArchId::De2) == pred::Kind::Ensemble);
}

TEST_CASE("default K is 10 for MC dropout and BNN, 4 for ensembles") {
  CHECK(pred::default_config(models::ArchId::ConvLstmD, 0).K == 10);
  CHECK(pred::default_config(models::ArchId::Bnn, 0).K == 10);
  CHECK(pred::default_config(models::ArchId::De1, 0).K == 4);
  CHECK(pred::default_config(models::ArchId::De2, 0).K == 4);
}

TEST_CASE("prediction matrices are row-stochastic with the configured K") {
  const auto burst = make_burst(64, 5);
  for (auto arch : {models::ArchId::ConvLstmD, models::ArchId::Bnn,
                    models::ArchId::De1, models::ArchId::De2}) {
    auto model = built(arch);
    auto cfg = pred::default_config(arch, 91);
    auto m = pred::predict_dist(model, cfg, burst, 0);
    CHECK(m.K == cfg.K);
    CHECK(m.C == 3);
    CHECK(m.probs.shape == std::vector<std::size_t>{m.K, 3});
    check_rows_on_simplex(m);
  }
}

TEST_CASE("ensemble K must equal the learner count") {
  auto model = built(models::ArchId::De1);
  pred::PredictorConfig cfg{pred::Kind::Ensemble, 3, 0};
  CHECK_THROWS_AS(pred::predict_dist(model, cfg, make_burst(64, 6), 0),
                  fd::InvalidSpec);
}

TEST_CASE("predictions are deterministic in (seed, example index)") {
  const auto burst = make_burst(64, 7);
  for (auto arch : {models::ArchId::ConvLstmD, models::ArchId::Bnn}) {
    auto model = built(arch);
    auto cfg = pred::default_config(arch, 17);
    auto a = pred::predict_dist(model, cfg, burst, 3);
    auto b = pred::predict_dist(model, cfg, burst, 3);
    CHECK(a.probs.data == b.probs.data);
    auto c = pred::predict_dist(model, cfg, burst, 4);
    CHECK(a.probs.data != c.probs.data);
    cfg.seed = 18;
    auto d = pred::predict_dist(model, cfg, burst, 3);
    CHECK(a.probs.data != d.probs.data);
  }
}

TEST_CASE("MC dropout rows differ across passes but collapse at rate zero") {
  // With live dropout, the K rows should not all be identical.
  auto model = built(models::ArchId::ConvLstmD);
  auto cfg = pred::default_config(models::ArchId::ConvLstmD, 23);
  const auto burst = make_burst(64, 9);
  auto m = pred::predict_dist(model, cfg, burst, 0);
  bool any_diff = false;
  for (std::size_t k = 1; k < m.K; ++k)
    for (std::size_t c = 0; c < m.C; ++c)
      any_diff = any_diff || m.probs.at2(k, c) != m.probs.at2(0, c);
  CHECK(any_diff);

  // A hand-built model whose only stochastic layer has rate 0: identical rows.
  models::Model nodrop;
  nodrop.spec = {models::ArchId::ConvLstmD, 3, 8, 1.0};
  nn::Network net;
  Rng init(29);
  net.add(std::make_unique<nn::Flatten>());
  net.add(std::make_unique<nn::Dropout>(0.0));
  net.add(std::make_unique<nn::Dense>(8, 3, nn::Activation::Softmax, init));
  nodrop.learners.push_back(std::move(net));
  auto m0 = pred::predict_dist(nodrop, cfg, make_burst(8, 11), 0);
  for (std::size_t k = 1; k < m0.K; ++k)
    for (std::size_t c = 0; c < m0.C; ++c)
      CHECK(m0.probs.at2(k, c) == m0.probs.at2(0, c));
}

TEST_CASE("BNN with near-zero posterior sigma collapses to identical rows") {
  models::Model model;
  model.spec = {models::ArchId::Bnn, 3, 8, 1.0};
  nn::Network net;
  Rng init(31);
  net.add(std::make_unique<nn::Flatten>());
  net.add(std::make_unique<nn::BayesianDense>(8, 3, nn::Activation::Softmax, 1.0,
                                              init));
  // Force sigma ~ 0.
  for (nn::Param* p : net.params())
    if (p->name.find("rho") != std::string::npos)
      for (double& v : p->value.data) v = -40.0;
  model.learners.push_back(std::move(net));

  pred::PredictorConfig cfg{pred::Kind::Bnn, 10, 37};
  auto m = pred::predict_dist(model, cfg, make_burst(8, 13), 0);
  for (std::size_t k = 1; k < m.K; ++k)
    for (std::size_t c = 0; c < m.C; ++c)
      CHECK(m.probs.at2(k, c) == doctest::Approx(m.probs.at2(0, c)).epsilon(1e-12));
}

TEST_CASE("mean_dist stays on the simplex and matches the hand example") {
  pred::PredictionMatrix m;
  m.K = 2;
  m.C = 2;
  m.probs = fd::Tensor({2, 2}, {0.5, 0.5, 1.0, 0.0});
  auto mean = pred::mean_dist(m);
  CHECK(mean[0] == doctest::Approx(0.75));
  CHECK(mean[1] == doctest::Approx(0.25));

  pred::PredictionMatrix one;
  one.K = 1;
  one.C = 3;
  one.probs = fd::Tensor({1, 3}, {0.2, 0.3, 0.5});
  CHECK(pred::mean_dist(one) == std::vector<double>{0.2, 0.3, 0.5});
}

TEST_CASE("forward pass accounting: 4 for ensembles, 10 for MC dropout and BNN") {
  const auto burst = make_burst(64, 15);
  struct Case {
    models::ArchId arch;
    std::size_t expected;
  };
  for (auto [arch, expected] : {Case{models::ArchId::De1, 4},
                                Case{models::ArchId::De2, 4},
                                Case{models::ArchId::ConvLstmD, 10},
                                Case{models::ArchId::Bnn, 10}}) {
    auto model = built(arch);
    auto cfg = pred::default_config(arch, 41);
    pred::reset_forward_pass_count();
    pred::predict_dist(model, cfg, burst, 0);
    CHECK(pred::forward_pass_count() == expected);
  }
}
