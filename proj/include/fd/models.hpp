#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fd/adam.hpp"
#include "fd/layers.hpp"
#include "fd/signal.hpp"

namespace fd::models {

enum class ArchId { ConvLstmD, Bnn, De1, De2 };

ArchId arch_from_string(const std::string& s);
std::string arch_to_string(ArchId a);

struct ModelSpec {
  ArchId arch = ArchId::ConvLstmD;
  std::size_t num_classes = 6;
  std::size_t input_len = 512;
  double scale = 1.0;  // width multiplier in (0,1], rounded up, min 1
};

// Width after applying the desk-scale knob.
std::size_t scaled_width(std::size_t width, double scale);

struct TrainConfig {
  std::size_t epochs = 25;
  std::size_t batch_size = 64;
  nn::AdamConfig adam;
  std::uint64_t seed = 0;
};

struct Model {
  ModelSpec spec;
  std::vector<nn::Network> learners;  // 1 for ConvLSTM-D / BNN, 4 for ensembles
  std::uint64_t init_seed = 0;
  std::uint64_t train_seed = 0;
  std::size_t trained_epochs = 0;

  std::size_t learner_count() const { return learners.size(); }
};

Model build(const ModelSpec& spec, std::uint64_t init_seed);

// Flat per-learner layer descriptions, used for structural checks.
using LayerDesc = std::vector<std::pair<std::string, std::string>>;
std::vector<std::vector<LayerDesc>> describe(const Model& m);

struct TrainResult {
  std::vector<double> loss_history;  // one entry per epoch (mean over learners)
  double final_train_accuracy = 0.0;
};

TrainResult train(Model& model, const signal::LabeledDataset& train_set,
                  const TrainConfig& cfg);

// Forward a batch of bursts through one learner.
Tensor forward_bursts(nn::Network& net, const std::vector<const signal::Burst*>& batch,
                      nn::Mode mode, Rng& rng);

void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

constexpr int kCheckpointVersion = 1;

}  // namespace fd::models
