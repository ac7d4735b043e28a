#include "fd/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fd/errors.hpp"
#include "fd/ops.hpp"

namespace fd::models {

using nlohmann::ordered_json;
using nn::Activation;

ArchId arch_from_string(const std::string& s) {
  if (s == "convlstm_d") return ArchId::ConvLstmD;
  if (s == "bnn") return ArchId::Bnn;
  if (s == "de1") return ArchId::De1;
  if (s == "de2") return ArchId::De2;
  throw InvalidSpec("unknown architecture: " + s);
}

std::string arch_to_string(ArchId a) {
  switch (a) {
    case ArchId::ConvLstmD: return "convlstm_d";
    case ArchId::Bnn: return "bnn";
    case ArchId::De1: return "de1";
    case ArchId::De2: return "de2";
  }
  return "convlstm_d";
}

std::size_t scaled_width(std::size_t width, double scale) {
  const auto w = static_cast<std::size_t>(
      std::ceil(static_cast<double>(width) * scale));
  return std::max<std::size_t>(w, 1);
}

namespace {

constexpr double kDropRate = 0.2;
constexpr double kPriorSigma = 1.0;

void add_conv_pool(nn::Network& net, std::size_t in_ch, std::size_t out_ch,
                   std::size_t kernel, std::size_t stride, Rng& init) {
  net.add(std::make_unique<nn::Conv1d>(in_ch, out_ch, kernel, stride, init));
  net.add(std::make_unique<nn::BatchNorm1d>(out_ch));
  net.add(std::make_unique<nn::ActivationLayer>(Activation::Relu));
  net.add(std::make_unique<nn::MaxPool1d>(2, 2));
}

// Spatial length after a conv (same padding) + pool(2,2) pair.
std::size_t conv_pool_len(std::size_t len, std::size_t stride) {
  return ceil_div(ceil_div(len, stride), 2);
}

nn::Network make_convlstm_d(const ModelSpec& s, Rng& init) {
  nn::Network net;
  const std::size_t ch1 = scaled_width(16, s.scale);
  const std::size_t ch2 = scaled_width(32, s.scale);
  const std::size_t hid = scaled_width(64, s.scale);
  const std::size_t fc = scaled_width(100, s.scale);
  add_conv_pool(net, 1, ch1, 64, 16, init);
  net.add(std::make_unique<nn::Dropout>(kDropRate));
  add_conv_pool(net, ch1, ch2, 3, 1, init);
  net.add(std::make_unique<nn::Dropout>(kDropRate));
  net.add(std::make_unique<nn::Lstm>(ch2, hid, init));
  net.add(std::make_unique<nn::Dense>(hid, fc, Activation::Sigmoid, init));
  net.add(std::make_unique<nn::Dropout>(kDropRate));
  net.add(std::make_unique<nn::Dense>(fc, s.num_classes, Activation::Softmax, init));
  return net;
}

nn::Network make_bnn(const ModelSpec& s, Rng& init) {
  nn::Network net;
  const std::size_t ch1 = scaled_width(16, s.scale);
  const std::size_t ch2 = scaled_width(32, s.scale);
  const std::size_t hid = scaled_width(64, s.scale);
  const std::size_t fc = scaled_width(100, s.scale);
  add_conv_pool(net, 1, ch1, 64, 16, init);
  add_conv_pool(net, ch1, ch2, 3, 1, init);
  net.add(std::make_unique<nn::Lstm>(ch2, hid, init));
  net.add(std::make_unique<nn::BayesianDense>(hid, fc, Activation::Sigmoid,
                                              kPriorSigma, init));
  // Train-time dropout between the two Bayesian layers.
  net.add(std::make_unique<nn::Dropout>(kDropRate));
  net.add(std::make_unique<nn::BayesianDense>(fc, s.num_classes, Activation::Softmax,
                                              kPriorSigma, init));
  return net;
}

nn::Network make_de1_learner(const ModelSpec& s, Rng& init) {
  nn::Network net;
  const std::size_t ch = scaled_width(16, s.scale);
  const std::size_t fc = scaled_width(64, s.scale);
  add_conv_pool(net, 1, ch, 3, 1, init);
  const std::size_t flat = conv_pool_len(s.input_len, 1) * ch;
  net.add(std::make_unique<nn::Flatten>());
  net.add(std::make_unique<nn::Dense>(flat, fc, Activation::Sigmoid, init));
  net.add(std::make_unique<nn::Dense>(fc, s.num_classes, Activation::Softmax, init));
  return net;
}

nn::Network make_de2_deep_learner(const ModelSpec& s, Rng& init) {
  nn::Network net;
  const std::size_t ch1 = scaled_width(16, s.scale);
  const std::size_t ch2 = scaled_width(32, s.scale);
  const std::size_t hid = scaled_width(64, s.scale);
  const std::size_t fc = scaled_width(100, s.scale);
  add_conv_pool(net, 1, ch1, 64, 16, init);
  add_conv_pool(net, ch1, ch2, 3, 1, init);
  net.add(std::make_unique<nn::Lstm>(ch2, hid, init));
  net.add(std::make_unique<nn::Dense>(hid, fc, Activation::Sigmoid, init));
  net.add(std::make_unique<nn::Dropout>(kDropRate));
  net.add(std::make_unique<nn::Dense>(fc, s.num_classes, Activation::Softmax, init));
  return net;
}

}  // namespace

Model build(const ModelSpec& spec, std::uint64_t init_seed) {
  if (spec.num_classes < 2) throw InvalidSpec("need at least 2 classes");
  if (!(spec.scale > 0.0 && spec.scale <= 1.0))
    throw InvalidSpec("scale must lie in (0,1]");
  if (spec.input_len < 8) throw InvalidSpec("input length too short");

  Model m;
  m.spec = spec;
  m.init_seed = init_seed;
  switch (spec.arch) {
    case ArchId::ConvLstmD: {
      Rng init = Rng::derive(init_seed, {0});
      m.learners.push_back(make_convlstm_d(spec, init));
      break;
    }
    case ArchId::Bnn: {
      Rng init = Rng::derive(init_seed, {0});
      m.learners.push_back(make_bnn(spec, init));
      break;
    }
    case ArchId::De1: {
      for (std::size_t l = 0; l < 4; ++l) {
        Rng init = Rng::derive(init_seed, {l});
        m.learners.push_back(make_de1_learner(spec, init));
      }
      break;
    }
    case ArchId::De2: {
      for (std::size_t l = 0; l < 2; ++l) {
        Rng init = Rng::derive(init_seed, {l});
        m.learners.push_back(make_de1_learner(spec, init));
      }
      for (std::size_t l = 2; l < 4; ++l) {
        Rng init = Rng::derive(init_seed, {l});
        m.learners.push_back(make_de2_deep_learner(spec, init));
      }
      break;
    }
  }
  return m;
}

std::vector<std::vector<LayerDesc>> describe(const Model& m) {
  std::vector<std::vector<LayerDesc>> out;
  for (const auto& learner : m.learners) {
    std::vector<LayerDesc> layers;
    for (const auto& layer : learner.layers()) {
      LayerDesc d = layer->hyperparams();
      d.insert(d.begin(), {"kind", layer->kind()});
      layers.push_back(std::move(d));
    }
    out.push_back(std::move(layers));
  }
  return out;
}

Tensor forward_bursts(nn::Network& net, const std::vector<const signal::Burst*>& batch,
                      nn::Mode mode, Rng& rng) {
  if (batch.empty()) throw EmptyInput("forward_bursts: empty batch");
  const std::size_t len = batch.front()->values.size();
  Tensor x({batch.size(), len, 1});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->values.size() != len)
      throw ShapeMismatch("bursts in one batch must share a length");
    for (std::size_t t = 0; t < len; ++t) x.at3(i, t, 0) = batch[i]->values[t];
  }
  return net.forward(x, mode, rng);
}

TrainResult train(Model& model, const signal::LabeledDataset& train_set,
                  const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw InvalidSpec("epochs must be >= 1");
  const std::size_t n = train_set.bursts.size();
  if (n == 0) throw EmptyInput("empty training set");
  for (const auto& b : train_set.bursts)
    if (b.label >= model.spec.num_classes)
      throw InvalidSpec("label " + std::to_string(b.label) +
                        " out of range for C=" + std::to_string(model.spec.num_classes));

  model.train_seed = cfg.seed;
  model.trained_epochs = cfg.epochs;
  const std::size_t batch_size = std::min(cfg.batch_size, n);
  const std::size_t num_batches = ceil_div(n, batch_size);
  // ELBO weighting: mean NLL per batch plus KL/(num_batches * batch_size),
  // i.e. the per-example form of NLL-sum + KL/num_batches.
  const double kl_coeff =
      1.0 / (static_cast<double>(num_batches) * static_cast<double>(batch_size));

  TrainResult result;
  result.loss_history.assign(cfg.epochs, 0.0);
  std::size_t correct_last = 0, seen_last = 0;

  for (std::size_t l = 0; l < model.learners.size(); ++l) {
    nn::Network& net = model.learners[l];
    nn::Adam opt(net.params(), cfg.adam);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      // Per-learner derived streams keep ensemble members independent of
      // one another and of training order.
      Rng shuffle_rng = Rng::derive(cfg.seed, {l, epoch, 0xF15Eu});
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      for (std::size_t i = n; i-- > 1;) {
        const std::size_t j = shuffle_rng.uniform_below(i + 1);
        std::swap(order[i], order[j]);
      }

      double epoch_loss = 0.0;
      std::size_t correct = 0, seen = 0;
      for (std::size_t bi = 0; bi < num_batches; ++bi) {
        const std::size_t lo = bi * batch_size;
        const std::size_t hi = std::min(lo + batch_size, n);
        if (hi - lo < 2 && num_batches > 1) continue;  // batchnorm needs >= 2
        std::vector<const signal::Burst*> batch;
        std::vector<std::size_t> labels;
        for (std::size_t i = lo; i < hi; ++i) {
          batch.push_back(&train_set.bursts[order[i]]);
          labels.push_back(train_set.bursts[order[i]].label);
        }
        Rng pass_rng = Rng::derive(cfg.seed, {l, epoch, bi, 0xBA7Cu});
        net.zero_grad();
        Tensor probs = forward_bursts(net, batch, nn::Mode::Train, pass_rng);
        Tensor gprobs;
        double loss = ops::cross_entropy_batch(probs, labels, &gprobs);
        loss += net.regularizer(kl_coeff);
        if (!std::isfinite(loss))
          throw NonFiniteLoss("learner " + std::to_string(l) + " epoch " +
                              std::to_string(epoch) + " batch " + std::to_string(bi));
        net.backward(gprobs);
        net.regularizer_backward(kl_coeff);
        opt.step();
        epoch_loss += loss * static_cast<double>(hi - lo);
        seen += hi - lo;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          std::size_t argmax = 0;
          for (std::size_t c = 1; c < probs.dim(1); ++c)
            if (probs.at2(i, c) > probs.at2(i, argmax)) argmax = c;
          if (argmax == labels[i]) ++correct;
        }
      }
      result.loss_history[epoch] +=
          epoch_loss / static_cast<double>(n) / static_cast<double>(model.learners.size());
      if (epoch + 1 == cfg.epochs) {
        correct_last += correct;
        seen_last += seen;
      }
    }
  }
  result.final_train_accuracy =
      seen_last ? static_cast<double>(correct_last) / static_cast<double>(seen_last) : 0.0;
  return result;
}

void save_checkpoint(const Model& m, const std::string& path) {
  ordered_json j;
  j["format_version"] = kCheckpointVersion;
  j["architecture_id"] = arch_to_string(m.spec.arch);
  j["num_classes"] = m.spec.num_classes;
  j["input_len"] = m.spec.input_len;
  j["scale"] = m.spec.scale;
  j["seeds"] = {{"init", m.init_seed}, {"train", m.train_seed}};
  j["epochs"] = m.trained_epochs;
  ordered_json learners = ordered_json::array();
  for (const auto& learner : m.learners) {
    ordered_json lj;
    ordered_json params = ordered_json::array();
    // params() is non-const by interface; checkpointing only reads values.
    auto& mutable_learner = const_cast<nn::Network&>(learner);
    std::size_t layer_idx = 0;
    for (const auto& layer : learner.layers()) {
      for (nn::Param* p : layer->params()) {
        params.push_back({{"name", std::to_string(layer_idx) + "." + p->name},
                          {"shape", p->value.shape},
                          {"values", p->value.data}});
      }
      ++layer_idx;
    }
    lj["params"] = std::move(params);
    ordered_json buffers = ordered_json::array();
    for (auto& [name, t] : mutable_learner.buffers())
      buffers.push_back({{"name", name}, {"shape", t->shape}, {"values", t->data}});
    lj["buffers"] = std::move(buffers);
    learners.push_back(std::move(lj));
  }
  j["learners"] = std::move(learners);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump();
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("malformed JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kCheckpointVersion)
      throw VersionMismatch("checkpoint version " +
                            j.at("format_version").dump() + " unsupported");
    ModelSpec spec;
    spec.arch = arch_from_string(j.at("architecture_id").get<std::string>());
    spec.num_classes = j.at("num_classes").get<std::size_t>();
    spec.input_len = j.at("input_len").get<std::size_t>();
    spec.scale = j.at("scale").get<double>();
    Model m = build(spec, j.at("seeds").at("init").get<std::uint64_t>());
    m.train_seed = j.at("seeds").at("train").get<std::uint64_t>();
    m.trained_epochs = j.at("epochs").get<std::size_t>();
    const auto& learners = j.at("learners");
    if (learners.size() != m.learners.size())
      throw CorruptCheckpoint("learner count mismatch");
    for (std::size_t l = 0; l < m.learners.size(); ++l) {
      std::vector<nn::Param*> params;
      std::size_t layer_idx = 0;
      std::vector<std::string> names;
      for (const auto& layer : m.learners[l].layers()) {
        for (nn::Param* p : layer->params()) {
          params.push_back(p);
          names.push_back(std::to_string(layer_idx) + "." + p->name);
        }
        ++layer_idx;
      }
      const auto& pj = learners[l].at("params");
      if (pj.size() != params.size()) throw CorruptCheckpoint("parameter count mismatch");
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (pj[i].at("name").get<std::string>() != names[i])
          throw CorruptCheckpoint("parameter name mismatch: " + names[i]);
        auto shape = pj[i].at("shape").get<std::vector<std::size_t>>();
        auto values = pj[i].at("values").get<std::vector<double>>();
        if (shape != params[i]->value.shape ||
            values.size() != params[i]->value.size())
          throw CorruptCheckpoint("parameter shape mismatch: " + names[i]);
        params[i]->value.data = std::move(values);
      }
      auto buffers = m.learners[l].buffers();
      const auto& bj = learners[l].at("buffers");
      if (bj.size() != buffers.size()) throw CorruptCheckpoint("buffer count mismatch");
      for (std::size_t i = 0; i < buffers.size(); ++i) {
        if (bj[i].at("name").get<std::string>() != buffers[i].first)
          throw CorruptCheckpoint("buffer name mismatch");
        auto values = bj[i].at("values").get<std::vector<double>>();
        if (values.size() != buffers[i].second->size())
          throw CorruptCheckpoint("buffer size mismatch");
        buffers[i].second->data = std::move(values);
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("missing or mistyped field: ") + e.what());
  }
}

}  // namespace fd::models
