#include "fd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fd/errors.hpp"
#include "fd/predictors.hpp"

namespace fd::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string snr_key(noise::Kind kind, double snr_db) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%gdb", noise::kind_to_string(kind).c_str(), snr_db);
  return buf;
}

predictors::PredictorConfig predictor_config(const SuiteConfig& cfg, models::ArchId arch,
                                             std::uint64_t stream_key) {
  predictors::PredictorConfig pc = predictors::default_config(arch, 0);
  if (pc.kind == predictors::Kind::McDropout) pc.K = cfg.mc_dropout_k;
  if (pc.kind == predictors::Kind::Bnn) pc.K = cfg.bnn_k;
  pc.seed = Rng::derive(cfg.predictor_seed, {stream_key}).next_u64();
  return pc;
}

struct EvalResult {
  std::vector<double> entropies;
  double seconds = 0.0;
  std::size_t passes = 0;
};

EvalResult eval_entropies(models::Model& model, const predictors::PredictorConfig& pc,
                          const std::vector<signal::Burst>& bursts) {
  EvalResult res;
  res.entropies.reserve(bursts.size());
  const std::size_t passes_before = predictors::forward_pass_count();
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < bursts.size(); ++i) {
    const auto m = predictors::predict_dist(model, pc, bursts[i], i);
    res.entropies.push_back(uncertainty::entropy(m));
  }
  res.seconds = seconds_since(t0);
  res.passes = predictors::forward_pass_count() - passes_before;
  return res;
}

ScenarioReport finish_report(const SuiteConfig& cfg, ScenarioReport rep,
                             const std::vector<double>& val_entropies,
                             const std::vector<bool>& val_ood,
                             const std::vector<double>& id_val_entropies,
                             const std::vector<double>& test_entropies,
                             const std::vector<bool>& test_ood,
                             std::size_t model_num_classes) {
  rep.thresholds = uncertainty::calibrate(id_val_entropies, val_entropies, val_ood);
  rep.outcome_tau1.tau = rep.thresholds.tau1;
  rep.outcome_tau1.test = uncertainty::confusion(
      uncertainty::classify_trust(test_entropies, rep.thresholds.tau1), test_ood);
  rep.outcome_tau2.tau = rep.thresholds.tau2;
  rep.outcome_tau2.test = uncertainty::confusion(
      uncertainty::classify_trust(test_entropies, rep.thresholds.tau2), test_ood);
  rep.test_size = test_entropies.size();
  rep.ood_count = static_cast<std::size_t>(
      std::count(test_ood.begin(), test_ood.end(), true));
  if (cfg.emit_histograms) {
    fs::create_directories(cfg.out_dir);
    rep.histogram_file = cfg.out_dir + "/hist_" + rep.scenario_kind + "_" +
                         rep.scenario_key + "_" + rep.model + ".csv";
    uncertainty::write_histogram_csv(
        uncertainty::entropy_histogram(test_entropies, test_ood, model_num_classes),
        rep.histogram_file);
  }
  return rep;
}

}  // namespace

SuiteData prepare_data(const SuiteConfig& cfg) {
  signal::LabeledDataset ds;
  switch (cfg.data_mode) {
    case SuiteConfig::DataMode::Synthetic:
      ds = signal::generate_synthetic(cfg.num_classes, cfg.per_class, cfg.length,
                                      cfg.data_seed);
      break;
    case SuiteConfig::DataMode::DatasetFile:
      ds = signal::load_dataset(cfg.data_path);
      break;
    case SuiteConfig::DataMode::Directory: {
      std::map<std::size_t, std::vector<signal::TimeSeries>> per_class;
      for (auto& s : signal::load_directory(cfg.data_path)) per_class[s.label].push_back(s);
      std::size_t count = cfg.per_class_count;
      if (count == 0) throw InvalidSpec("per_class_count required for directory mode");
      ds = signal::build_dataset(per_class, cfg.window, cfg.shift, count);
      break;
    }
  }
  SuiteData data;
  data.num_classes = ds.num_classes;
  data.burst_len = ds.bursts.empty() ? cfg.window : ds.bursts.front().values.size();
  data.splits = signal::split_dataset(ds, cfg.split);
  return data;
}

ScenarioReport run_epistemic(const SuiteConfig& cfg, const SuiteData& data,
                             models::ArchId arch, std::size_t holdout_class) {
  if (data.num_classes < 3) throw InvalidSpec("epistemic scenarios need >= 3 classes");
  if (holdout_class >= data.num_classes) throw InvalidSpec("holdout class out of range");

  ScenarioReport rep;
  rep.scenario_kind = "epistemic";
  rep.scenario_key = "holdout_" + std::to_string(holdout_class);
  rep.model = models::arch_to_string(arch);

  // ID-only training set with labels remapped to a dense 0..C-2 range.
  signal::LabeledDataset train_set;
  train_set.num_classes = data.num_classes - 1;
  for (const auto& b : data.splits.train.bursts) {
    if (b.label == holdout_class) continue;
    signal::Burst nb = b;
    nb.label = b.label > holdout_class ? b.label - 1 : b.label;
    train_set.bursts.push_back(std::move(nb));
  }

  const auto arch_key = static_cast<std::uint64_t>(arch);
  models::ModelSpec spec{arch, train_set.num_classes, data.burst_len, cfg.scale};
  models::Model model =
      models::build(spec, Rng::derive(cfg.train.seed, {arch_key, 0, holdout_class, 1}).next_u64());
  models::TrainConfig tc = cfg.train;
  tc.seed = Rng::derive(cfg.train.seed, {arch_key, 0, holdout_class, 2}).next_u64();

  const auto t0 = std::chrono::steady_clock::now();
  models::train(model, train_set, tc);
  if (cfg.wall_timing) rep.train_s = seconds_since(t0);

  // Validation: all classes, the held-out one flagged OOD.
  const auto pc_val = predictor_config(cfg, arch, arch_key * 1000 + holdout_class * 10 + 0);
  EvalResult val = eval_entropies(model, pc_val, data.splits.validation.bursts);
  std::vector<bool> val_ood;
  std::vector<double> id_val;
  for (std::size_t i = 0; i < data.splits.validation.bursts.size(); ++i) {
    const bool ood = data.splits.validation.bursts[i].label == holdout_class;
    val_ood.push_back(ood);
    if (!ood) id_val.push_back(val.entropies[i]);
  }

  const auto pc_test = predictor_config(cfg, arch, arch_key * 1000 + holdout_class * 10 + 1);
  EvalResult test = eval_entropies(model, pc_test, data.splits.test.bursts);
  std::vector<bool> test_ood;
  for (const auto& b : data.splits.test.bursts) test_ood.push_back(b.label == holdout_class);
  if (cfg.wall_timing) rep.predict_s = test.seconds;
  rep.passes_per_example =
      data.splits.test.bursts.empty() ? 0 : test.passes / data.splits.test.bursts.size();

  return finish_report(cfg, std::move(rep), val.entropies, val_ood, id_val,
                       test.entropies, test_ood, spec.num_classes);
}

ScenarioReport run_aleatoric(const SuiteConfig& cfg, const SuiteData& data,
                             models::ArchId arch, const noise::NoiseSpec& spec,
                             ModelCache& cache) {
  spec.validate();
  ScenarioReport rep;
  rep.scenario_kind = "aleatoric";
  rep.scenario_key = snr_key(spec.kind, spec.target_snr_db);
  rep.model = models::arch_to_string(arch);

  const auto arch_key = static_cast<std::uint64_t>(arch);
  auto it = cache.find(arch);
  if (it == cache.end()) {
    models::ModelSpec mspec{arch, data.num_classes, data.burst_len, cfg.scale};
    models::Model model =
        models::build(mspec, Rng::derive(cfg.train.seed, {arch_key, 1, 1}).next_u64());
    models::TrainConfig tc = cfg.train;
    tc.seed = Rng::derive(cfg.train.seed, {arch_key, 1, 2}).next_u64();
    const auto t0 = std::chrono::steady_clock::now();
    models::train(model, data.splits.train, tc);
    if (cfg.wall_timing) rep.train_s = seconds_since(t0);
    it = cache.emplace(arch, std::move(model)).first;
  }
  models::Model& model = it->second;

  // Independent seeded corruption draws for validation and test.
  const auto kind_key = static_cast<std::uint64_t>(spec.kind);
  const auto snr_key_u = static_cast<std::uint64_t>(
      static_cast<std::int64_t>(std::llround(spec.target_snr_db * 1000.0)));
  noise::CorruptionPlan val_plan{cfg.noise.fraction,
                                 Rng::derive(cfg.noise_seed, {kind_key, snr_key_u, 0}).next_u64(),
                                 spec};
  noise::CorruptionPlan test_plan{cfg.noise.fraction,
                                  Rng::derive(cfg.noise_seed, {kind_key, snr_key_u, 1}).next_u64(),
                                  spec};
  const auto val_corrupt = noise::corrupt_split(data.splits.validation, val_plan);
  const auto test_corrupt = noise::corrupt_split(data.splits.test, test_plan);

  const auto pc_val =
      predictor_config(cfg, arch, 0xA000000u + arch_key * 10000 + kind_key * 100 + snr_key_u % 97);
  EvalResult val = eval_entropies(model, pc_val, val_corrupt.dataset.bursts);
  std::vector<double> id_val;
  for (std::size_t i = 0; i < val.entropies.size(); ++i)
    if (!val_corrupt.ood_mask[i]) id_val.push_back(val.entropies[i]);

  const auto pc_test =
      predictor_config(cfg, arch, 0xB000000u + arch_key * 10000 + kind_key * 100 + snr_key_u % 97);
  EvalResult test = eval_entropies(model, pc_test, test_corrupt.dataset.bursts);
  if (cfg.wall_timing) rep.predict_s = test.seconds;
  rep.passes_per_example = test_corrupt.dataset.bursts.empty()
                               ? 0
                               : test.passes / test_corrupt.dataset.bursts.size();

  return finish_report(cfg, std::move(rep), val.entropies, val_corrupt.ood_mask, id_val,
                       test.entropies, test_corrupt.ood_mask, data.num_classes);
}

SuiteReport run_suite(const SuiteConfig& cfg) {
  const SuiteData data = prepare_data(cfg);
  SuiteReport suite;

  for (models::ArchId arch : cfg.model_list) {
    ModelCache cache;
    if (cfg.run_epistemic) {
      for (std::size_t h = 0; h < data.num_classes; ++h) {
        ScenarioReport rep;
        try {
          rep = run_epistemic(cfg, data, arch, h);
        } catch (const std::exception& e) {
          rep.scenario_kind = "epistemic";
          rep.scenario_key = "holdout_" + std::to_string(h);
          rep.model = models::arch_to_string(arch);
          rep.error = e.what();
        }
        suite.reports.push_back(std::move(rep));
      }
    }
    if (cfg.run_aleatoric) {
      for (noise::Kind kind : cfg.noise.kinds) {
        for (double snr : cfg.noise.snr_dbs) {
          noise::NoiseSpec spec{kind, snr, cfg.noise.impulse_p, cfg.noise.weibull_k};
          ScenarioReport rep;
          try {
            rep = run_aleatoric(cfg, data, arch, spec, cache);
          } catch (const std::exception& e) {
            rep.scenario_kind = "aleatoric";
            rep.scenario_key = snr_key(kind, snr);
            rep.model = models::arch_to_string(arch);
            rep.error = e.what();
          }
          suite.reports.push_back(std::move(rep));
        }
      }
    }
  }

  std::sort(suite.reports.begin(), suite.reports.end(),
            [](const ScenarioReport& a, const ScenarioReport& b) {
              if (a.scenario_kind != b.scenario_kind) return a.scenario_kind < b.scenario_kind;
              if (a.scenario_key != b.scenario_key) return a.scenario_key < b.scenario_key;
              return a.model < b.model;
            });
  suite.scenario_count = suite.reports.size();
  std::size_t ok = 0, conservative = 0;
  for (const auto& r : suite.reports) {
    if (r.failed()) {
      ++suite.failed_count;
      continue;
    }
    ++ok;
    if (r.thresholds.tau1 <= r.thresholds.tau2) ++conservative;
  }
  suite.tau1_le_tau2_fraction =
      ok ? static_cast<double>(conservative) / static_cast<double>(ok) : 0.0;
  return suite;
}

void emit_csv(const SuiteReport& report, const SuiteConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "scenario_kind,scenario_key,model,threshold_kind,tau,ood_ut_pct,id_ut_pct,"
         "precision,recall,f1,train_s,predict_s,seed,scale\n";
  char buf[512];
  for (const auto& r : report.reports) {
    if (r.failed()) continue;
    const std::pair<const char*, const ThresholdOutcome*> rows[2] = {
        {"tau1", &r.outcome_tau1}, {"tau2", &r.outcome_tau2}};
    for (const auto& [kind, oc] : rows) {
      std::snprintf(buf, sizeof(buf),
                    "%s,%s,%s,%s,%.6f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%llu,%g\n",
                    r.scenario_kind.c_str(), r.scenario_key.c_str(), r.model.c_str(),
                    kind, oc->tau, 100.0 * oc->test.ood_ut_rate,
                    100.0 * oc->test.id_ut_rate, oc->test.precision, oc->test.recall,
                    oc->test.f1, r.train_s, r.predict_s,
                    static_cast<unsigned long long>(cfg.train.seed), cfg.scale);
      out << buf;
    }
  }
}

namespace {
ordered_json confusion_json(const uncertainty::TrustConfusion& c) {
  return {{"tp", c.tp},          {"fp", c.fp},
          {"fn", c.fn},          {"tn", c.tn},
          {"precision", c.precision}, {"recall", c.recall},
          {"f1", c.f1},          {"ood_ut_pct", 100.0 * c.ood_ut_rate},
          {"id_ut_pct", 100.0 * c.id_ut_rate}};
}
}  // namespace

void emit_json(const SuiteReport& report, const SuiteConfig& cfg, const std::string& path) {
  ordered_json j;
  j["scenario_count"] = report.scenario_count;
  j["failed_count"] = report.failed_count;
  j["tau1_le_tau2_fraction"] = report.tau1_le_tau2_fraction;
  j["seed"] = cfg.train.seed;
  j["scale"] = cfg.scale;
  ordered_json arr = ordered_json::array();
  for (const auto& r : report.reports) {
    ordered_json e;
    e["scenario_kind"] = r.scenario_kind;
    e["scenario_key"] = r.scenario_key;
    e["model"] = r.model;
    if (r.failed()) {
      e["error"] = r.error;
      arr.push_back(std::move(e));
      continue;
    }
    e["tau1"] = r.thresholds.tau1;
    e["tau2"] = r.thresholds.tau2;
    e["calibration"] = {{"q1", r.thresholds.q1},
                        {"q3", r.thresholds.q3},
                        {"tau2_candidates", r.thresholds.tau2_candidates},
                        {"tau2_f1", r.thresholds.tau2_f1}};
    e["tau1_test"] = confusion_json(r.outcome_tau1.test);
    e["tau2_test"] = confusion_json(r.outcome_tau2.test);
    e["train_s"] = r.train_s;
    e["predict_s"] = r.predict_s;
    e["test_size"] = r.test_size;
    e["ood_count"] = r.ood_count;
    e["passes_per_example"] = r.passes_per_example;
    e["histogram_file"] = r.histogram_file;
    arr.push_back(std::move(e));
  }
  j["scenarios"] = std::move(arr);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

SuiteConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed config " + path + ": " + e.what());
  }
  SuiteConfig cfg;
  if (j.contains("data")) {
    const auto& d = j["data"];
    if (d.contains("mode")) {
      const auto m = d["mode"].get<std::string>();
      if (m == "synthetic")
        cfg.data_mode = SuiteConfig::DataMode::Synthetic;
      else if (m == "directory")
        cfg.data_mode = SuiteConfig::DataMode::Directory;
      else if (m == "dataset_file")
        cfg.data_mode = SuiteConfig::DataMode::DatasetFile;
      else
        throw InvalidSpec("unknown data mode: " + m);
    }
    if (d.contains("path")) cfg.data_path = d["path"].get<std::string>();
    if (d.contains("num_classes")) cfg.num_classes = d["num_classes"].get<std::size_t>();
    if (d.contains("per_class")) cfg.per_class = d["per_class"].get<std::size_t>();
    if (d.contains("length")) cfg.length = d["length"].get<std::size_t>();
    if (d.contains("window")) cfg.window = d["window"].get<std::size_t>();
    if (d.contains("shift")) cfg.shift = d["shift"].get<std::size_t>();
    if (d.contains("per_class_count"))
      cfg.per_class_count = d["per_class_count"].get<std::size_t>();
    if (d.contains("seed")) cfg.data_seed = d["seed"].get<std::uint64_t>();
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    if (s.contains("train_fraction")) cfg.split.train_fraction = s["train_fraction"].get<double>();
    if (s.contains("test_fraction_of_rest"))
      cfg.split.test_fraction_of_rest = s["test_fraction_of_rest"].get<double>();
    if (s.contains("seed")) cfg.split.seed = s["seed"].get<std::uint64_t>();
  }
  if (j.contains("models")) {
    const auto& m = j["models"];
    if (m.contains("list")) {
      cfg.model_list.clear();
      for (const auto& a : m["list"])
        cfg.model_list.push_back(models::arch_from_string(a.get<std::string>()));
    }
    if (m.contains("scale")) cfg.scale = m["scale"].get<double>();
    if (m.contains("epochs")) cfg.train.epochs = m["epochs"].get<std::size_t>();
    if (m.contains("batch_size")) cfg.train.batch_size = m["batch_size"].get<std::size_t>();
    if (m.contains("lr")) cfg.train.adam.lr = m["lr"].get<double>();
    if (m.contains("seed")) cfg.train.seed = m["seed"].get<std::uint64_t>();
  }
  if (j.contains("predictors")) {
    const auto& p = j["predictors"];
    if (p.contains("mc_dropout_k")) cfg.mc_dropout_k = p["mc_dropout_k"].get<std::size_t>();
    if (p.contains("bnn_k")) cfg.bnn_k = p["bnn_k"].get<std::size_t>();
    if (p.contains("seed")) cfg.predictor_seed = p["seed"].get<std::uint64_t>();
  }
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    if (n.contains("kinds")) {
      cfg.noise.kinds.clear();
      for (const auto& k : n["kinds"])
        cfg.noise.kinds.push_back(noise::kind_from_string(k.get<std::string>()));
    }
    if (n.contains("snr_db")) cfg.noise.snr_dbs = n["snr_db"].get<std::vector<double>>();
    if (n.contains("fraction")) cfg.noise.fraction = n["fraction"].get<double>();
    if (n.contains("impulse_p")) cfg.noise.impulse_p = n["impulse_p"].get<double>();
    if (n.contains("weibull_k")) cfg.noise.weibull_k = n["weibull_k"].get<double>();
    if (n.contains("seed")) cfg.noise_seed = n["seed"].get<std::uint64_t>();
  }
  if (j.contains("scenarios")) {
    const auto& s = j["scenarios"];
    if (s.contains("epistemic")) cfg.run_epistemic = s["epistemic"].get<bool>();
    if (s.contains("aleatoric")) cfg.run_aleatoric = s["aleatoric"].get<bool>();
  }
  if (j.contains("output")) {
    const auto& o = j["output"];
    if (o.contains("directory")) cfg.out_dir = o["directory"].get<std::string>();
    if (o.contains("formats")) {
      cfg.emit_csv = cfg.emit_json = false;
      for (const auto& f : o["formats"]) {
        const auto s = f.get<std::string>();
        if (s == "csv") cfg.emit_csv = true;
        if (s == "json") cfg.emit_json = true;
      }
    }
    if (o.contains("histograms")) cfg.emit_histograms = o["histograms"].get<bool>();
    if (o.contains("timing")) cfg.wall_timing = o["timing"].get<std::string>() == "wall";
  }
  return cfg;
}

}  // namespace fd::pipeline
