#pragma once

#include <cstddef>
#include <vector>

#include "fd/rng.hpp"
#include "fd/tensor.hpp"

// Layer-level primitives with explicit forward contexts and hand-derived
// reverse-mode gradients. A model's tape is the ordered list of these
// contexts; the backward pass walks it in reverse.

namespace fd::ops {

constexpr double kProbClamp = 1e-12;
constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

struct SamePad {
  std::size_t out_len;
  std::size_t pad_left;
  std::size_t pad_right;
};

// "same" padding: out_len = ceil(L/stride); total pad split floor-left /
// ceil-right with zeros.
SamePad same_padding(std::size_t in_len, std::size_t kernel, std::size_t stride);

// ---- conv1d ----
struct Conv1dCtx {
  Tensor x, w;
  std::size_t stride = 1, pad_left = 0;
};
Tensor conv1d(const Tensor& x, const Tensor& w, std::size_t stride,
              Conv1dCtx* ctx = nullptr);
Tensor conv1d_backward(const Conv1dCtx& ctx, const Tensor& gy, Tensor& gw);

// ---- maxpool1d ----
struct MaxPoolCtx {
  std::vector<std::size_t> in_shape;
  std::vector<std::size_t> argmax;  // flat input index per output slot
};
Tensor maxpool1d(const Tensor& x, std::size_t kernel = 2, std::size_t stride = 2,
                 MaxPoolCtx* ctx = nullptr);
Tensor maxpool1d_backward(const MaxPoolCtx& ctx, const Tensor& gy);

// ---- batchnorm1d ----
enum class BnMode { Train, Inference };
struct BatchNormState {
  Tensor running_mean, running_var;  // [C]
  explicit BatchNormState(std::size_t channels)
      : running_mean({channels}), running_var({channels}) {
    running_var.fill(1.0);
  }
  BatchNormState() = default;
};
struct BatchNormCtx {
  Tensor x_hat;       // normalized input
  Tensor inv_std;     // [C]
  Tensor gamma;
  std::size_t count = 0;  // elements per channel
};
Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BnMode mode, BatchNormState& state, BatchNormCtx* ctx = nullptr);
Tensor batchnorm1d_backward(const BatchNormCtx& ctx, const Tensor& gy,
                            Tensor& ggamma, Tensor& gbeta);

// ---- activations ----
struct ActCtx {
  Tensor y;  // forward output, enough for relu/sigmoid/tanh/softmax backward
};
Tensor relu(const Tensor& x, ActCtx* ctx = nullptr);
Tensor relu_backward(const ActCtx& ctx, const Tensor& gy);
Tensor sigmoid(const Tensor& x, ActCtx* ctx = nullptr);
Tensor sigmoid_backward(const ActCtx& ctx, const Tensor& gy);
// Row-wise stabilized softmax over the last axis of a [N, C] tensor.
Tensor softmax_rows(const Tensor& x, ActCtx* ctx = nullptr);
Tensor softmax_rows_backward(const ActCtx& ctx, const Tensor& gy);

// ---- dense (affine) ----
struct AffineCtx {
  Tensor x, w;
};
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b,
              AffineCtx* ctx = nullptr);
Tensor affine_backward(const AffineCtx& ctx, const Tensor& gy, Tensor& gw, Tensor& gb);

// ---- LSTM ----
struct LstmWeights {
  Tensor wx;  // [F, 4H], gate order i, f, g, o
  Tensor wh;  // [H, 4H]
  Tensor b;   // [4H]
};
struct LstmCtx {
  Tensor x;
  std::vector<Tensor> gates;  // per step [N, 4H], post-activation
  std::vector<Tensor> c;      // per step [N, H]
  std::vector<Tensor> h;      // per step [N, H]
  const LstmWeights* weights = nullptr;
};
// x: [N, T, F] -> final hidden state [N, H].
Tensor lstm_forward(const Tensor& x, const LstmWeights& w, std::size_t hidden,
                    LstmCtx* ctx = nullptr);
Tensor lstm_backward(const LstmCtx& ctx, const Tensor& gh_last, LstmWeights& grads);

// ---- dropout ----
enum class DropoutMode { Train, McInference, Off };
struct DropoutCtx {
  Tensor mask;  // multiplicative, already includes the 1/(1-rate) scaling
};
Tensor dropout_apply(const Tensor& x, double rate, Rng& rng, DropoutMode mode,
                     DropoutCtx* ctx = nullptr);
Tensor dropout_backward(const DropoutCtx& ctx, const Tensor& gy);

// ---- variational Gaussian weights ----
struct GaussianWeight {
  Tensor mu, rho;  // sigma = softplus(rho)
};
struct BayesCtx {
  Tensor x;
  Tensor w_sample, b_sample;
  Tensor eps_w, eps_b;
  const GaussianWeight* w = nullptr;
  const GaussianWeight* b = nullptr;
};
// Reparameterized sample w = mu + softplus(rho) * eps, then affine.
Tensor bayesian_affine(const Tensor& x, const GaussianWeight& w,
                       const GaussianWeight& b, Rng& rng, BayesCtx* ctx = nullptr);
Tensor bayesian_affine_backward(const BayesCtx& ctx, const Tensor& gy,
                                GaussianWeight& gw, GaussianWeight& gb);

// KL(q || N(0, prior_sigma^2)) summed over all weights.
double kl_gaussian(const GaussianWeight& w, double prior_sigma);
// Adds coeff * dKL/d(mu,rho) into the gradient tensors.
void kl_gaussian_backward(const GaussianWeight& w, double prior_sigma, double coeff,
                          GaussianWeight& grads);

// ---- loss ----
// -ln(p[label]) with p clamped at kProbClamp.
double cross_entropy(const std::vector<double>& probabilities, std::size_t label);
// Mean cross-entropy over a batch of probability rows [N, C]; fills the
// gradient with respect to the probabilities.
double cross_entropy_batch(const Tensor& probs, const std::vector<std::size_t>& labels,
                           Tensor* gprobs = nullptr);

double softplus(double x);

}  // namespace fd::ops
