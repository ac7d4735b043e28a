#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fd/models.hpp"
#include "fd/noise.hpp"
#include "fd/signal.hpp"
#include "fd/uncertainty.hpp"

namespace fd::pipeline {

struct NoiseGrid {
  std::vector<noise::Kind> kinds{noise::Kind::Gaussian, noise::Kind::Impulse,
                                 noise::Kind::Rayleigh, noise::Kind::Weibull};
  std::vector<double> snr_dbs{-5.0, 0.0, 5.0};
  double fraction = 0.20;
  double impulse_p = 0.05;
  double weibull_k = 2.0;
};

struct SuiteConfig {
  // data
  enum class DataMode { Synthetic, Directory, DatasetFile };
  DataMode data_mode = DataMode::Synthetic;
  std::string data_path;
  std::size_t num_classes = 4;
  std::size_t per_class = 200;
  std::size_t length = 512;
  std::size_t window = 512;
  std::size_t shift = 200;
  std::size_t per_class_count = 0;  // directory mode
  std::uint64_t data_seed = 1;
  // split
  signal::SplitConfig split{};
  // models
  std::vector<models::ArchId> model_list{models::ArchId::ConvLstmD, models::ArchId::Bnn,
                                         models::ArchId::De1, models::ArchId::De2};
  double scale = 0.25;
  models::TrainConfig train{};
  // predictors
  std::size_t mc_dropout_k = 10;
  std::size_t bnn_k = 10;
  std::uint64_t predictor_seed = 3;
  // noise
  NoiseGrid noise;
  std::uint64_t noise_seed = 4;
  // scenario toggles
  bool run_epistemic = true;
  bool run_aleatoric = true;
  // output
  std::string out_dir = "out";
  bool emit_csv = true;
  bool emit_json = true;
  bool emit_histograms = true;
  bool wall_timing = true;  // false writes 0 timings for byte-stable reports
};

SuiteConfig load_config(const std::string& path);

struct ThresholdOutcome {
  double tau = 0.0;
  uncertainty::TrustConfusion test;
};

struct ScenarioReport {
  std::string scenario_kind;  // "epistemic" | "aleatoric"
  std::string scenario_key;   // "holdout_2" | "gaussian_-5db"
  std::string model;
  uncertainty::ThresholdPair thresholds;
  ThresholdOutcome outcome_tau1, outcome_tau2;
  double train_s = 0.0, predict_s = 0.0;
  std::size_t test_size = 0, ood_count = 0;
  std::size_t passes_per_example = 0;
  std::string histogram_file;
  std::string error;  // nonempty when the scenario failed

  bool failed() const { return !error.empty(); }
};

struct SuiteReport {
  std::vector<ScenarioReport> reports;  // sorted by (kind, key, model)
  double tau1_le_tau2_fraction = 0.0;
  std::size_t scenario_count = 0;
  std::size_t failed_count = 0;
};

// Shared per-suite state: the dataset splits, built once.
struct SuiteData {
  signal::Splits splits;
  std::size_t num_classes = 0;
  std::size_t burst_len = 0;
};

SuiteData prepare_data(const SuiteConfig& cfg);

ScenarioReport run_epistemic(const SuiteConfig& cfg, const SuiteData& data,
                             models::ArchId arch, std::size_t holdout_class);

// Clean-trained models are shared across the noise grid; the cache maps
// architecture to its trained model.
using ModelCache = std::map<models::ArchId, models::Model>;

ScenarioReport run_aleatoric(const SuiteConfig& cfg, const SuiteData& data,
                             models::ArchId arch, const noise::NoiseSpec& spec,
                             ModelCache& cache);

SuiteReport run_suite(const SuiteConfig& cfg);

void emit_csv(const SuiteReport& report, const SuiteConfig& cfg, const std::string& path);
void emit_json(const SuiteReport& report, const SuiteConfig& cfg, const std::string& path);

}  // namespace fd::pipeline
