#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fd/rng.hpp"

namespace fd::signal {

struct TimeSeries {
  std::vector<double> samples;
  std::size_t label = 0;
  std::string source_id;
};

struct BurstOrigin {
  std::string source_id;
  std::size_t start_index = 0;
  bool operator==(const BurstOrigin&) const = default;
  bool operator<(const BurstOrigin& o) const {
    return source_id != o.source_id ? source_id < o.source_id : start_index < o.start_index;
  }
};

struct Burst {
  std::vector<double> values;
  std::size_t label = 0;
  bool ood = false;
  BurstOrigin origin;
};

struct LabeledDataset {
  std::vector<Burst> bursts;
  std::size_t num_classes = 0;

  std::vector<std::size_t> class_counts() const;
  std::size_t size() const { return bursts.size(); }
};

struct SplitConfig {
  double train_fraction = 0.70;
  double test_fraction_of_rest = 0.70;
  std::uint64_t seed = 0;
};

// Sliding-window extraction: starts 0, shift, 2*shift, ...;
// count = floor((L - window) / shift) + 1 when L >= window, else 0.
std::vector<Burst> extract_bursts(const TimeSeries& series, std::size_t window,
                                  std::size_t shift);

// Balanced dataset: exactly per_class_count bursts per class, in extraction
// order. Throws InsufficientData if a class cannot supply enough.
LabeledDataset build_dataset(const std::map<std::size_t, std::vector<TimeSeries>>& per_class,
                             std::size_t window, std::size_t shift,
                             std::size_t per_class_count);

struct Splits {
  LabeledDataset train, validation, test;
};

// Deterministic Fisher-Yates shuffle by seed, then
// n_train = floor(f_train * n); of the remainder r, n_test = floor(f_test * r),
// n_val = r - n_test.
Splits split_dataset(const LabeledDataset& ds, const SplitConfig& cfg);

// Desk-scale stand-in corpus: class c is a sum of two sinusoids at
// class-distinct frequencies with seeded random phase and Gaussian jitter.
LabeledDataset generate_synthetic(std::size_t num_classes, std::size_t per_class,
                                  std::size_t length, std::uint64_t seed);

// Raw ingestion: `.f32le` flat little-endian float32 or single-column CSV
// (optional header); filename convention `<label>_<source_id>.{f32le,csv}`.
TimeSeries load_series(const std::string& path);
std::vector<TimeSeries> load_directory(const std::string& dir);

// Dataset file round-trip (JSON).
void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

}  // namespace fd::signal
