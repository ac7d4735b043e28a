#include "fd/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fd/errors.hpp"

namespace fd::signal {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const Burst& b : bursts) counts.at(b.label)++;
  return counts;
}

std::vector<Burst> extract_bursts(const TimeSeries& series, std::size_t window,
                                  std::size_t shift) {
  if (window < 1 || shift < 1)
    throw InvalidSpec("extract_bursts requires window >= 1 and shift >= 1");
  std::vector<Burst> out;
  const std::size_t len = series.samples.size();
  if (len < window) return out;
  const std::size_t count = (len - window) / shift + 1;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = i * shift;
    Burst b;
    b.values.assign(series.samples.begin() + static_cast<std::ptrdiff_t>(start),
                    series.samples.begin() + static_cast<std::ptrdiff_t>(start + window));
    b.label = series.label;
    b.origin = {series.source_id, start};
    out.push_back(std::move(b));
  }
  return out;
}

LabeledDataset build_dataset(const std::map<std::size_t, std::vector<TimeSeries>>& per_class,
                             std::size_t window, std::size_t shift,
                             std::size_t per_class_count) {
  LabeledDataset ds;
  ds.num_classes = per_class.empty() ? 0 : per_class.rbegin()->first + 1;
  for (const auto& [cls, series_list] : per_class) {
    std::size_t taken = 0;
    for (const TimeSeries& s : series_list) {
      if (taken == per_class_count) break;
      for (Burst& b : extract_bursts(s, window, shift)) {
        if (taken == per_class_count) break;
        b.label = cls;
        ds.bursts.push_back(std::move(b));
        ++taken;
      }
    }
    if (taken < per_class_count)
      throw InsufficientData("class " + std::to_string(cls) + " supplies only " +
                             std::to_string(taken) + " of " +
                             std::to_string(per_class_count) + " bursts");
  }
  return ds;
}

Splits split_dataset(const LabeledDataset& ds, const SplitConfig& cfg) {
  if (ds.bursts.empty()) throw EmptyInput("split_dataset: dataset is empty");
  if (cfg.train_fraction <= 0.0 || cfg.train_fraction >= 1.0 ||
      cfg.test_fraction_of_rest <= 0.0 || cfg.test_fraction_of_rest >= 1.0)
    throw InvalidSpec("split fractions must lie strictly inside (0,1)");

  const std::size_t n = ds.bursts.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::derive(cfg.seed, {0x517u});
  for (std::size_t i = n; i-- > 1;) {
    const std::size_t j = rng.uniform_below(i + 1);
    std::swap(order[i], order[j]);
  }

  const auto n_train = static_cast<std::size_t>(
      std::floor(cfg.train_fraction * static_cast<double>(n)));
  const std::size_t rest = n - n_train;
  const auto n_test = static_cast<std::size_t>(
      std::floor(cfg.test_fraction_of_rest * static_cast<double>(rest)));
  const std::size_t n_val = rest - n_test;
  if (n_train == 0 || n_test == 0 || n_val == 0)
    throw EmptySplit("split would leave an empty part (n=" + std::to_string(n) + ")");

  Splits out;
  out.train.num_classes = out.validation.num_classes = out.test.num_classes = ds.num_classes;
  for (std::size_t i = 0; i < n_train; ++i) out.train.bursts.push_back(ds.bursts[order[i]]);
  for (std::size_t i = n_train; i < n_train + n_test; ++i)
    out.test.bursts.push_back(ds.bursts[order[i]]);
  for (std::size_t i = n_train + n_test; i < n; ++i)
    out.validation.bursts.push_back(ds.bursts[order[i]]);
  return out;
}

LabeledDataset generate_synthetic(std::size_t num_classes, std::size_t per_class,
                                  std::size_t length, std::uint64_t seed) {
  if (num_classes < 2) throw InvalidSpec("generate_synthetic requires >= 2 classes");
  if (length < 8) throw InvalidSpec("generate_synthetic requires length >= 8");

  LabeledDataset ds;
  ds.num_classes = num_classes;
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (std::size_t c = 0; c < num_classes; ++c) {
    // Two class-distinct normalized frequencies (cycles per sample).
    const double f1 = 0.012 + 0.017 * static_cast<double>(c);
    const double f2 = 0.051 + 0.023 * static_cast<double>(c);
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng = Rng::derive(seed, {c, i});
      const double phase1 = kTwoPi * rng.uniform();
      const double phase2 = kTwoPi * rng.uniform();
      Burst b;
      b.values.resize(length);
      double power = 0.0;
      for (std::size_t t = 0; t < length; ++t) {
        const double v = std::sin(kTwoPi * f1 * static_cast<double>(t) + phase1) +
                         0.6 * std::sin(kTwoPi * f2 * static_cast<double>(t) + phase2);
        b.values[t] = v;
        power += v * v;
      }
      const double rms = std::sqrt(power / static_cast<double>(length));
      for (double& v : b.values) v += 0.05 * rms * rng.normal();
      b.label = c;
      b.origin = {"synthetic_c" + std::to_string(c), i};
      ds.bursts.push_back(std::move(b));
    }
  }
  return ds;
}

namespace {

// Parses `<label>_<source_id>` from a filename stem.
bool parse_stem(const std::string& stem, std::size_t& label, std::string& source_id) {
  const auto us = stem.find('_');
  if (us == std::string::npos || us == 0) return false;
  try {
    label = std::stoul(stem.substr(0, us));
  } catch (...) {
    return false;
  }
  source_id = stem.substr(us + 1);
  return true;
}

std::vector<double> read_f32le(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % 4 != 0) throw IoError(path + " is not a multiple of 4 bytes");
  std::vector<float> raw(bytes / 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read from " + path);
  return {raw.begin(), raw.end()};
}

std::vector<double> read_csv_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<double> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(std::stod(line));
    } catch (...) {
      if (first) {  // optional header row
        first = false;
        continue;
      }
      throw IoError("non-numeric row in " + path + ": " + line);
    }
    first = false;
  }
  return out;
}

}  // namespace

TimeSeries load_series(const std::string& path) {
  const fs::path p(path);
  TimeSeries ts;
  if (!parse_stem(p.stem().string(), ts.label, ts.source_id))
    throw IoError("filename must follow <label>_<source_id>.{f32le,csv}: " + path);
  const std::string ext = p.extension().string();
  if (ext == ".f32le")
    ts.samples = read_f32le(path);
  else if (ext == ".csv")
    ts.samples = read_csv_column(path);
  else
    throw IoError("unsupported extension (want .f32le or .csv): " + path);
  if (ts.samples.empty()) throw EmptyInput("no samples in " + path);
  for (double v : ts.samples)
    if (!std::isfinite(v)) throw NonFiniteValue("non-finite sample in " + path);
  return ts;
}

std::vector<TimeSeries> load_directory(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext == ".f32le" || ext == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TimeSeries> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_series(f.string()));
  return out;
}

void save_dataset(const LabeledDataset& ds, const std::string& path) {
  json j;
  j["num_classes"] = ds.num_classes;
  json arr = json::array();
  for (const Burst& b : ds.bursts) {
    arr.push_back({{"label", b.label},
                   {"ood", b.ood},
                   {"source_id", b.origin.source_id},
                   {"start", b.origin.start_index},
                   {"values", b.values}});
  }
  j["bursts"] = std::move(arr);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump();
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed dataset file " + path + ": " + e.what());
  }
  LabeledDataset ds;
  ds.num_classes = j.at("num_classes").get<std::size_t>();
  for (const auto& e : j.at("bursts")) {
    Burst b;
    b.label = e.at("label").get<std::size_t>();
    b.ood = e.at("ood").get<bool>();
    b.origin.source_id = e.at("source_id").get<std::string>();
    b.origin.start_index = e.at("start").get<std::size_t>();
    b.values = e.at("values").get<std::vector<double>>();
    ds.bursts.push_back(std::move(b));
  }
  return ds;
}

}  // namespace fd::signal
