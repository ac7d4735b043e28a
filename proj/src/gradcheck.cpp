#include "fd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fd/ops.hpp"
#include "fd/rng.hpp"

namespace fd::gradcheck {

namespace {
double eval_loss(nn::Network& net, const Tensor& x, const std::vector<std::size_t>& labels,
                 std::uint64_t pass_seed, double kl_coeff) {
  Rng rng = Rng::derive(pass_seed, {0xEBA1u});
  Tensor probs = net.forward(x, nn::Mode::Train, rng);
  return ops::cross_entropy_batch(probs, labels, nullptr) + net.regularizer(kl_coeff);
}
}  // namespace

Result check_learner(nn::Network& net, const Tensor& x,
                     const std::vector<std::size_t>& labels, std::uint64_t pass_seed,
                     const Options& opts, const std::string& name) {
  // Analytic gradients at the unperturbed point.
  net.zero_grad();
  {
    Rng rng = Rng::derive(pass_seed, {0xEBA1u});
    Tensor probs = net.forward(x, nn::Mode::Train, rng);
    Tensor gprobs;
    ops::cross_entropy_batch(probs, labels, &gprobs);
    net.backward(gprobs);
    net.regularizer_backward(opts.kl_coeff);
  }

  Result res;
  res.name = name;
  Rng pick = Rng::derive(opts.sample_seed, {0x9Cu});
  for (nn::Param* p : net.params()) {
    const std::size_t n = p->value.size();
    const std::size_t samples = std::min(opts.samples_per_tensor, n);
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t idx = pick.uniform_below(n);
      const double orig = p->value.data[idx];
      p->value.data[idx] = orig + opts.step;
      const double up = eval_loss(net, x, labels, pass_seed, opts.kl_coeff);
      p->value.data[idx] = orig - opts.step;
      const double down = eval_loss(net, x, labels, pass_seed, opts.kl_coeff);
      p->value.data[idx] = orig;
      const double fd = (up - down) / (2.0 * opts.step);
      const double an = p->grad.data[idx];
      const double denom = std::max({std::abs(fd), std::abs(an), opts.denom_floor});
      res.max_rel_err = std::max(res.max_rel_err, std::abs(fd - an) / denom);
      ++res.checked;
    }
  }
  res.pass = res.max_rel_err <= opts.tolerance;
  return res;
}

std::vector<Result> check_model(models::Model& model, std::size_t batch,
                                std::uint64_t data_seed, const Options& opts) {
  Rng data_rng = Rng::derive(data_seed, {0xDA7Au});
  Tensor x({batch, model.spec.input_len, 1});
  for (double& v : x.data) v = data_rng.normal();
  std::vector<std::size_t> labels(batch);
  for (auto& l : labels) l = data_rng.uniform_below(model.spec.num_classes);

  std::vector<Result> out;
  for (std::size_t l = 0; l < model.learners.size(); ++l) {
    out.push_back(check_learner(model.learners[l], x, labels, data_seed + l, opts,
                                models::arch_to_string(model.spec.arch) +
                                    "/learner" + std::to_string(l)));
  }
  return out;
}

}  // namespace fd::gradcheck
