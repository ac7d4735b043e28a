#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fd/ops.hpp"
#include "fd/rng.hpp"
#include "fd/tensor.hpp"

namespace fd::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

enum class Mode {
  Train,        // dropout on, batchnorm batch statistics
  Inference,    // dropout off, batchnorm running statistics
  McInference,  // dropout on, batchnorm running statistics
};

enum class Activation { None, Relu, Sigmoid, Softmax };

Activation activation_from_string(const std::string& s);
std::string activation_to_string(Activation a);

class Layer {
 public:
  virtual ~Layer() = default;
  // Stochastic layers draw from rng in call order; reseeding the rng and
  // replaying the same forward reproduces the pass exactly.
  virtual Tensor forward(const Tensor& x, Mode mode, Rng& rng) = 0;
  // Accumulates parameter gradients, returns gradient w.r.t. the input.
  virtual Tensor backward(const Tensor& gy) = 0;
  virtual std::vector<Param*> params() { return {}; }
  // Non-trained state carried in checkpoints (batchnorm running stats).
  virtual std::vector<std::pair<std::string, Tensor*>> buffers() { return {}; }
  virtual std::string kind() const = 0;
  // Flat "field=value" hyperparameter summary used for structural checks.
  virtual std::vector<std::pair<std::string, std::string>> hyperparams() const {
    return {};
  }
  // Extra loss contributed by the layer (KL for variational layers).
  virtual double regularizer(double /*coeff*/) { return 0.0; }
  virtual void regularizer_backward(double /*coeff*/) {}
};

class Conv1d final : public Layer {
 public:
  Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
         Rng& init);
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& gy) override;
  std::vector<Param*> params() override { return {&w_}; }
  std::string kind() const override { return "conv1d"; }
  std::vector<std::pair<std::string, std::string>> hyperparams() const override;

 private:
  Param w_;  // [k, Cin, Cout]
  std::size_t stride_;
  ops::Conv1dCtx ctx_;
};

class MaxPool1d final : public Layer {
 public:
  explicit MaxPool1d(std::size_t kernel = 2, std::size_t stride = 2)
      : kernel_(kernel), stride_(stride) {}
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& gy) override;
  std::string kind() const override { return "maxpool1d"; }
  std::vector<std::pair<std::string, std::string>> hyperparams() const override;

 private:
  std::size_t kernel_, stride_;
  ops::MaxPoolCtx ctx_;
};

class BatchNorm1d final : public Layer {
 public:
  explicit BatchNorm1d(std::size_t channels);
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& gy) override;
  std::vector<Param*> params() override { return {&gamma_, &beta_}; }
  std::vector<std::pair<std::string, Tensor*>> buffers() override {
    return {{"running_mean", &state_.running_mean}, {"running_var", &state_.running_var}};
  }
  std::string kind() const override { return "batchnorm1d"; }
  std::vector<std::pair<std::string, std::string>> hyperparams() const override;

 private:
  Param gamma_, beta_;
  ops::BatchNormState state_;
  ops::BatchNormCtx ctx_;
};

class ActivationLayer final : public Layer {
 public:
  explicit ActivationLayer(Activation act) : act_(act) {}
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& gy) override;
  std::string kind() const override { return "activation"; }
  std::vector<std::pair<std::string, std::string>> hyperparams() const override {
    return {{"function", activation_to_string(act_)}};
  }

 private:
  Activation act_;
  ops::ActCtx ctx_;
};

class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& gy) override;
  std::string kind() const override { return "flatten"; }

 private:
  std::vector<std::size_t> in_shape_;
};

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, Activation act, Rng& init);
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& gy) override;
  std::vector<Param*> params() override { return {&w_, &b_}; }
  std::string kind() const override { return "dense"; }
  std::vector<std::pair<std::string, std::string>> hyperparams() const override;

 private:
  Param w_, b_;
  Activation act_;
  ops::AffineCtx affine_ctx_;
  ops::ActCtx act_ctx_;
};

class Lstm final : public Layer {
 public:
  Lstm(std::size_t in, std::size_t hidden, Rng& init);
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& gy) override;
  std::vector<Param*> params() override { return {&wx_, &wh_, &b_}; }
  std::string kind() const override { return "lstm"; }
  std::vector<std::pair<std::string, std::string>> hyperparams() const override;

 private:
  std::size_t hidden_;
  Param wx_, wh_, b_;
  ops::LstmCtx ctx_;
  ops::LstmWeights w_hold_;  // ctx_ keeps a pointer into this between passes
  ops::LstmWeights weights_view() const;
};

class Dropout final : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& gy) override;
  std::string kind() const override { return "dropout"; }
  std::vector<std::pair<std::string, std::string>> hyperparams() const override;
  double rate() const { return rate_; }

 private:
  double rate_;
  ops::DropoutCtx ctx_;
};

class BayesianDense final : public Layer {
 public:
  BayesianDense(std::size_t in, std::size_t out, Activation act, double prior_sigma,
                Rng& init);
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& gy) override;
  std::vector<Param*> params() override {
    return {&w_mu_, &w_rho_, &b_mu_, &b_rho_};
  }
  std::string kind() const override { return "bayesian_dense"; }
  std::vector<std::pair<std::string, std::string>> hyperparams() const override;
  double regularizer(double coeff) override;
  void regularizer_backward(double coeff) override;

 private:
  Param w_mu_, w_rho_, b_mu_, b_rho_;
  Activation act_;
  double prior_sigma_;
  ops::BayesCtx ctx_;
  ops::ActCtx act_ctx_;
  ops::GaussianWeight w_hold_, b_hold_;  // ctx_ points into these
  ops::GaussianWeight w_view() const { return {w_mu_.value, w_rho_.value}; }
  ops::GaussianWeight b_view() const { return {b_mu_.value, b_rho_.value}; }
};

// Sequential network; the layer order is the tape.
class Network {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng);
  // gy is the gradient at the network output; parameter grads accumulate.
  Tensor backward(const Tensor& gy);
  std::vector<Param*> params();
  std::vector<std::pair<std::string, Tensor*>> buffers();
  void zero_grad();
  double regularizer(double coeff);
  void regularizer_backward(double coeff);
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  bool forward_done_ = false;
};

// Glorot-uniform initialization.
Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng);

}  // namespace fd::nn
