#include "fd/layers.hpp"

#include <cmath>

#include "fd/errors.hpp"

namespace fd::nn {

Activation activation_from_string(const std::string& s) {
  if (s == "none") return Activation::None;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "softmax") return Activation::Softmax;
  throw InvalidSpec("unknown activation: " + s);
}

std::string activation_to_string(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
  }
  return "none";
}

Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data) v = (2.0 * rng.uniform() - 1.0) * limit;
  return t;
}

namespace {
void accumulate(Tensor& into, const Tensor& from) {
  if (into.size() == 0) into = Tensor(from.shape);
  for (std::size_t i = 0; i < from.size(); ++i) into.data[i] += from.data[i];
}

Tensor apply_activation(Activation act, const Tensor& z, ops::ActCtx* ctx) {
  switch (act) {
    case Activation::None:
      if (ctx) ctx->y = z;
      return z;
    case Activation::Relu: return ops::relu(z, ctx);
    case Activation::Sigmoid: return ops::sigmoid(z, ctx);
    case Activation::Softmax: return ops::softmax_rows(z, ctx);
  }
  return z;
}

Tensor activation_backward(Activation act, const ops::ActCtx& ctx, const Tensor& gy) {
  switch (act) {
    case Activation::None: return gy;
    case Activation::Relu: return ops::relu_backward(ctx, gy);
    case Activation::Sigmoid: return ops::sigmoid_backward(ctx, gy);
    case Activation::Softmax: return ops::softmax_rows_backward(ctx, gy);
  }
  return gy;
}
}  // namespace

// ---- Conv1d ----

Conv1d::Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
               std::size_t stride, Rng& init)
    : stride_(stride) {
  w_.name = "w";
  w_.value = glorot_uniform({kernel, in_ch, out_ch}, kernel * in_ch, kernel * out_ch, init);
  w_.grad = Tensor({kernel, in_ch, out_ch});
}

Tensor Conv1d::forward(const Tensor& x, Mode, Rng&) {
  return ops::conv1d(x, w_.value, stride_, &ctx_);
}

Tensor Conv1d::backward(const Tensor& gy) {
  Tensor gw;
  Tensor gx = ops::conv1d_backward(ctx_, gy, gw);
  accumulate(w_.grad, gw);
  return gx;
}

std::vector<std::pair<std::string, std::string>> Conv1d::hyperparams() const {
  return {{"filters", std::to_string(w_.value.dim(2))},
          {"kernel_size", std::to_string(w_.value.dim(0))},
          {"strides", std::to_string(stride_)},
          {"padding", "same"},
          {"activation", "relu"}};
}

// ---- MaxPool1d ----

Tensor MaxPool1d::forward(const Tensor& x, Mode, Rng&) {
  return ops::maxpool1d(x, kernel_, stride_, &ctx_);
}

Tensor MaxPool1d::backward(const Tensor& gy) { return ops::maxpool1d_backward(ctx_, gy); }

std::vector<std::pair<std::string, std::string>> MaxPool1d::hyperparams() const {
  return {{"pool_strides", std::to_string(stride_)}};
}

// ---- BatchNorm1d ----

BatchNorm1d::BatchNorm1d(std::size_t channels) : state_(channels) {
  gamma_.name = "gamma";
  gamma_.value = Tensor({channels});
  gamma_.value.fill(1.0);
  gamma_.grad = Tensor({channels});
  beta_.name = "beta";
  beta_.value = Tensor({channels});
  beta_.grad = Tensor({channels});
}

Tensor BatchNorm1d::forward(const Tensor& x, Mode mode, Rng&) {
  const ops::BnMode bn = mode == Mode::Train ? ops::BnMode::Train : ops::BnMode::Inference;
  return ops::batchnorm1d(x, gamma_.value, beta_.value, bn, state_, &ctx_);
}

Tensor BatchNorm1d::backward(const Tensor& gy) {
  Tensor ggamma, gbeta;
  Tensor gx = ops::batchnorm1d_backward(ctx_, gy, ggamma, gbeta);
  accumulate(gamma_.grad, ggamma);
  accumulate(beta_.grad, gbeta);
  return gx;
}

std::vector<std::pair<std::string, std::string>> BatchNorm1d::hyperparams() const {
  return {{"batch_normalization", "active"}};
}

// ---- ActivationLayer ----

Tensor ActivationLayer::forward(const Tensor& x, Mode, Rng&) {
  return apply_activation(act_, x, &ctx_);
}

Tensor ActivationLayer::backward(const Tensor& gy) {
  return activation_backward(act_, ctx_, gy);
}

// ---- Flatten ----

Tensor Flatten::forward(const Tensor& x, Mode, Rng&) {
  in_shape_ = x.shape;
  return Tensor({x.dim(0), x.size() / x.dim(0)}, x.data);
}

Tensor Flatten::backward(const Tensor& gy) { return Tensor(in_shape_, gy.data); }

// ---- Dense ----

Dense::Dense(std::size_t in, std::size_t out, Activation act, Rng& init) : act_(act) {
  w_.name = "w";
  w_.value = glorot_uniform({in, out}, in, out, init);
  w_.grad = Tensor({in, out});
  b_.name = "b";
  b_.value = Tensor({out});
  b_.grad = Tensor({out});
}

Tensor Dense::forward(const Tensor& x, Mode, Rng&) {
  Tensor z = ops::affine(x, w_.value, b_.value, &affine_ctx_);
  return apply_activation(act_, z, &act_ctx_);
}

Tensor Dense::backward(const Tensor& gy) {
  Tensor gz = activation_backward(act_, act_ctx_, gy);
  Tensor gw, gb;
  Tensor gx = ops::affine_backward(affine_ctx_, gz, gw, gb);
  accumulate(w_.grad, gw);
  accumulate(b_.grad, gb);
  return gx;
}

std::vector<std::pair<std::string, std::string>> Dense::hyperparams() const {
  return {{"nodes", std::to_string(w_.value.dim(1))},
          {"activation", activation_to_string(act_)}};
}

// ---- Lstm ----

Lstm::Lstm(std::size_t in, std::size_t hidden, Rng& init) : hidden_(hidden) {
  wx_.name = "wx";
  wx_.value = glorot_uniform({in, 4 * hidden}, in, 4 * hidden, init);
  wx_.grad = Tensor({in, 4 * hidden});
  wh_.name = "wh";
  wh_.value = glorot_uniform({hidden, 4 * hidden}, hidden, 4 * hidden, init);
  wh_.grad = Tensor({hidden, 4 * hidden});
  b_.name = "b";
  b_.value = Tensor({4 * hidden});
  // Forget-gate bias 1.0 (gate order i, f, g, o).
  for (std::size_t u = 0; u < hidden; ++u) b_.value.data[hidden + u] = 1.0;
  b_.grad = Tensor({4 * hidden});
}

ops::LstmWeights Lstm::weights_view() const {
  return ops::LstmWeights{wx_.value, wh_.value, b_.value};
}

Tensor Lstm::forward(const Tensor& x, Mode, Rng&) {
  w_hold_ = weights_view();
  return ops::lstm_forward(x, w_hold_, hidden_, &ctx_);
}

Tensor Lstm::backward(const Tensor& gy) {
  ops::LstmWeights grads;
  Tensor gx = ops::lstm_backward(ctx_, gy, grads);
  accumulate(wx_.grad, grads.wx);
  accumulate(wh_.grad, grads.wh);
  accumulate(b_.grad, grads.b);
  return gx;
}

std::vector<std::pair<std::string, std::string>> Lstm::hyperparams() const {
  return {{"nodes", std::to_string(hidden_)}};
}

// ---- Dropout ----

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng& rng) {
  const ops::DropoutMode dm = mode == Mode::Inference ? ops::DropoutMode::Off
                              : mode == Mode::Train   ? ops::DropoutMode::Train
                                                      : ops::DropoutMode::McInference;
  return ops::dropout_apply(x, rate_, rng, dm, &ctx_);
}

Tensor Dropout::backward(const Tensor& gy) { return ops::dropout_backward(ctx_, gy); }

std::vector<std::pair<std::string, std::string>> Dropout::hyperparams() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", rate_);
  return {{"rate", buf}};
}

// ---- BayesianDense ----

BayesianDense::BayesianDense(std::size_t in, std::size_t out, Activation act,
                             double prior_sigma, Rng& init)
    : act_(act), prior_sigma_(prior_sigma) {
  // rho chosen so the initial posterior sigma is ~0.05.
  const double rho0 = std::log(std::exp(0.05) - 1.0);
  w_mu_ = Param{"w_mu", glorot_uniform({in, out}, in, out, init), Tensor({in, out})};
  w_rho_ = Param{"w_rho", Tensor({in, out}), Tensor({in, out})};
  w_rho_.value.fill(rho0);
  b_mu_ = Param{"b_mu", Tensor({out}), Tensor({out})};
  b_rho_ = Param{"b_rho", Tensor({out}), Tensor({out})};
  b_rho_.value.fill(rho0);
}

Tensor BayesianDense::forward(const Tensor& x, Mode, Rng& rng) {
  w_hold_ = w_view();
  b_hold_ = b_view();
  Tensor z = ops::bayesian_affine(x, w_hold_, b_hold_, rng, &ctx_);
  return apply_activation(act_, z, &act_ctx_);
}

Tensor BayesianDense::backward(const Tensor& gy) {
  Tensor gz = activation_backward(act_, act_ctx_, gy);
  ops::GaussianWeight gw, gb;
  Tensor gx = ops::bayesian_affine_backward(ctx_, gz, gw, gb);
  accumulate(w_mu_.grad, gw.mu);
  accumulate(w_rho_.grad, gw.rho);
  accumulate(b_mu_.grad, gb.mu);
  accumulate(b_rho_.grad, gb.rho);
  return gx;
}

double BayesianDense::regularizer(double coeff) {
  return coeff * (ops::kl_gaussian(w_view(), prior_sigma_) +
                  ops::kl_gaussian(b_view(), prior_sigma_));
}

void BayesianDense::regularizer_backward(double coeff) {
  ops::GaussianWeight gw{w_mu_.grad, w_rho_.grad};
  ops::kl_gaussian_backward(w_view(), prior_sigma_, coeff, gw);
  w_mu_.grad = gw.mu;
  w_rho_.grad = gw.rho;
  ops::GaussianWeight gb{b_mu_.grad, b_rho_.grad};
  ops::kl_gaussian_backward(b_view(), prior_sigma_, coeff, gb);
  b_mu_.grad = gb.mu;
  b_rho_.grad = gb.rho;
}

std::vector<std::pair<std::string, std::string>> BayesianDense::hyperparams() const {
  return {{"nodes", std::to_string(w_mu_.value.dim(1))},
          {"activation", activation_to_string(act_)}};
}

// ---- Network ----

Tensor Network::forward(const Tensor& x, Mode mode, Rng& rng) {
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h, mode, rng);
  forward_done_ = true;
  return h;
}

Tensor Network::backward(const Tensor& gy) {
  if (!forward_done_)
    throw DisconnectedGraph("backward called before any forward pass was recorded");
  Tensor g = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  for (auto& layer : layers_)
    for (Param* p : layer->params()) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Network::buffers() {
  std::vector<std::pair<std::string, Tensor*>> out;
  std::size_t idx = 0;
  for (auto& layer : layers_) {
    for (auto& [name, t] : layer->buffers())
      out.emplace_back(std::to_string(idx) + "." + name, t);
    ++idx;
  }
  return out;
}

void Network::zero_grad() {
  for (Param* p : params()) p->grad.fill(0.0);
}

double Network::regularizer(double coeff) {
  double total = 0.0;
  for (auto& layer : layers_) total += layer->regularizer(coeff);
  return total;
}

void Network::regularizer_backward(double coeff) {
  for (auto& layer : layers_) layer->regularizer_backward(coeff);
}

}  // namespace fd::nn
