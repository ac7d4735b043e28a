// Command-line front end for the uncertainty-aware fault-diagnosis pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fd/gradcheck.hpp"
#include "fd/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_synth(std::size_t classes, std::size_t per_class, std::size_t length,
              std::uint64_t seed, const std::string& out) {
  auto ds = fd::signal::generate_synthetic(classes, per_class, length, seed);
  fd::signal::save_dataset(ds, out);
  std::printf("wrote %zu bursts (%zu classes) to %s\n", ds.size(), ds.num_classes,
              out.c_str());
  return 0;
}

int cmd_ingest(const std::string& dir, std::size_t window, std::size_t shift,
               std::size_t per_class_count, const std::string& out) {
  std::map<std::size_t, std::vector<fd::signal::TimeSeries>> per_class;
  for (auto& s : fd::signal::load_directory(dir)) per_class[s.label].push_back(s);
  auto ds = fd::signal::build_dataset(per_class, window, shift, per_class_count);
  fd::signal::save_dataset(ds, out);
  std::printf("wrote %zu bursts (%zu classes) to %s\n", ds.size(), ds.num_classes,
              out.c_str());
  return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& arch_name, double scale,
              std::size_t epochs, std::size_t batch, double lr, std::uint64_t seed,
              const std::string& out) {
  auto ds = fd::signal::load_dataset(dataset_path);
  if (ds.bursts.empty()) throw fd::EmptyInput("dataset is empty");
  fd::models::ModelSpec spec{fd::models::arch_from_string(arch_name), ds.num_classes,
                             ds.bursts.front().values.size(), scale};
  auto model = fd::models::build(spec, fd::Rng::derive(seed, {1}).next_u64());
  fd::models::TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = batch;
  tc.adam.lr = lr;
  tc.seed = fd::Rng::derive(seed, {2}).next_u64();
  auto result = fd::models::train(model, ds, tc);
  fd::models::save_checkpoint(model, out);
  std::printf("trained %s for %zu epochs; final loss %.4f, train accuracy %.3f; saved %s\n",
              arch_name.c_str(), epochs, result.loss_history.back(),
              result.final_train_accuracy, out.c_str());
  return 0;
}

void emit_scenario_outputs(const fd::pipeline::SuiteConfig& cfg,
                           const fd::pipeline::SuiteReport& suite) {
  fs::create_directories(cfg.out_dir);
  if (cfg.emit_csv) fd::pipeline::emit_csv(suite, cfg, cfg.out_dir + "/report.csv");
  if (cfg.emit_json) fd::pipeline::emit_json(suite, cfg, cfg.out_dir + "/report.json");
  for (const auto& r : suite.reports) {
    if (r.failed())
      std::printf("FAILED %s/%s/%s: %s\n", r.scenario_kind.c_str(), r.scenario_key.c_str(),
                  r.model.c_str(), r.error.c_str());
    else
      std::printf("%s/%s/%s tau1=%.4f tau2=%.4f ood_ut(tau2)=%.2f%% id_ut(tau2)=%.2f%%\n",
                  r.scenario_kind.c_str(), r.scenario_key.c_str(), r.model.c_str(),
                  r.thresholds.tau1, r.thresholds.tau2,
                  100.0 * r.outcome_tau2.test.ood_ut_rate,
                  100.0 * r.outcome_tau2.test.id_ut_rate);
  }
  std::printf("tau1 <= tau2 in %.1f%% of scenarios (%zu run, %zu failed)\n",
              100.0 * suite.tau1_le_tau2_fraction, suite.scenario_count,
              suite.failed_count);
}

int cmd_scenario(const std::string& config_path, const std::string& model_name,
                 const std::string& kind, long holdout, const std::string& noise_kind,
                 double snr) {
  auto cfg = fd::pipeline::load_config(config_path);
  const auto data = fd::pipeline::prepare_data(cfg);
  const auto arch = fd::models::arch_from_string(model_name);
  fd::pipeline::SuiteReport suite;
  if (kind == "epistemic") {
    if (holdout < 0) throw fd::InvalidSpec("--holdout required for epistemic scenarios");
    suite.reports.push_back(fd::pipeline::run_epistemic(
        cfg, data, arch, static_cast<std::size_t>(holdout)));
  } else if (kind == "aleatoric") {
    fd::noise::NoiseSpec spec{fd::noise::kind_from_string(noise_kind), snr,
                              cfg.noise.impulse_p, cfg.noise.weibull_k};
    fd::pipeline::ModelCache cache;
    suite.reports.push_back(fd::pipeline::run_aleatoric(cfg, data, arch, spec, cache));
  } else {
    throw fd::InvalidSpec("scenario kind must be epistemic or aleatoric");
  }
  suite.scenario_count = 1;
  suite.tau1_le_tau2_fraction =
      suite.reports[0].thresholds.tau1 <= suite.reports[0].thresholds.tau2 ? 1.0 : 0.0;
  emit_scenario_outputs(cfg, suite);
  return 0;
}

int cmd_suite(const std::string& config_path) {
  auto cfg = fd::pipeline::load_config(config_path);
  auto suite = fd::pipeline::run_suite(cfg);
  emit_scenario_outputs(cfg, suite);
  return suite.failed_count == 0 ? 0 : 1;
}

int cmd_report(const std::string& json_path, const std::string& out_csv) {
  // Re-emit a CSV view from a previously written JSON suite report.
  std::ifstream in(json_path);
  if (!in) throw fd::IoError("cannot open " + json_path);
  nlohmann::json j;
  in >> j;
  std::ofstream out(out_csv);
  if (!out) throw fd::IoError("cannot write " + out_csv);
  out << "scenario_kind,scenario_key,model,threshold_kind,tau,ood_ut_pct,id_ut_pct,"
         "precision,recall,f1,train_s,predict_s,seed,scale\n";
  char buf[512];
  for (const auto& e : j.at("scenarios")) {
    if (e.contains("error")) continue;
    for (const char* kind : {"tau1", "tau2"}) {
      const auto& c = e.at(std::string(kind) + "_test");
      std::snprintf(buf, sizeof(buf),
                    "%s,%s,%s,%s,%.6f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%llu,%g\n",
                    e.at("scenario_kind").get<std::string>().c_str(),
                    e.at("scenario_key").get<std::string>().c_str(),
                    e.at("model").get<std::string>().c_str(), kind,
                    e.at(kind).get<double>(), c.at("ood_ut_pct").get<double>(),
                    c.at("id_ut_pct").get<double>(), c.at("precision").get<double>(),
                    c.at("recall").get<double>(), c.at("f1").get<double>(),
                    e.at("train_s").get<double>(), e.at("predict_s").get<double>(),
                    static_cast<unsigned long long>(j.at("seed").get<std::uint64_t>()),
                    j.at("scale").get<double>());
      out << buf;
    }
  }
  std::printf("wrote %s\n", out_csv.c_str());
  return 0;
}

int cmd_gradcheck(double scale, std::size_t batch, std::uint64_t seed) {
  bool all_pass = true;
  for (auto arch : {fd::models::ArchId::ConvLstmD, fd::models::ArchId::Bnn,
                    fd::models::ArchId::De1, fd::models::ArchId::De2}) {
    fd::models::ModelSpec spec{arch, 4, 512, scale};
    auto model = fd::models::build(spec, seed);
    fd::gradcheck::Options opts;
    for (const auto& r : fd::gradcheck::check_model(model, batch, seed, opts)) {
      std::printf("%-24s %s  max_rel_err=%.3e (checked %zu entries)\n", r.name.c_str(),
                  r.pass ? "PASS" : "FAIL", r.max_rel_err, r.checked);
      all_pass = all_pass && r.pass;
    }
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware vibration fault diagnosis pipeline"};
  app.require_subcommand(1);

  // synth
  std::size_t classes = 4, per_class = 200, length = 512;
  std::uint64_t seed = 7;
  std::string out = "dataset.json";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic burst corpus");
  synth->add_option("--classes", classes);
  synth->add_option("--per-class", per_class);
  synth->add_option("--length", length);
  synth->add_option("--seed", seed);
  synth->add_option("--out", out);

  // ingest
  std::string dir;
  std::size_t window = 512, shift = 200, per_class_count = 0;
  std::string ingest_out = "dataset.json";
  auto* ingest = app.add_subcommand("ingest", "Load raw signals into a dataset file");
  ingest->add_option("--dir", dir)->required();
  ingest->add_option("--window", window);
  ingest->add_option("--shift", shift);
  ingest->add_option("--per-class-count", per_class_count)->required();
  ingest->add_option("--out", ingest_out);

  // train
  std::string dataset_path, arch_name = "convlstm_d", ckpt_out = "model.ckpt.json";
  double scale = 1.0, lr = 1e-3;
  std::size_t epochs = 25, batch = 64;
  std::uint64_t train_seed = 42;
  auto* train = app.add_subcommand("train", "Train one model on a dataset file");
  train->add_option("--dataset", dataset_path)->required();
  train->add_option("--arch", arch_name);
  train->add_option("--scale", scale);
  train->add_option("--epochs", epochs);
  train->add_option("--batch", batch);
  train->add_option("--lr", lr);
  train->add_option("--seed", train_seed);
  train->add_option("--out", ckpt_out);

  // scenario
  std::string config_path, scen_kind = "epistemic", scen_model = "convlstm_d";
  std::string scen_noise = "gaussian";
  long holdout = -1;
  double snr = 0.0;
  auto* scenario = app.add_subcommand("scenario", "Run a single scenario");
  scenario->add_option("--config", config_path)->required();
  scenario->add_option("--model", scen_model);
  scenario->add_option("--kind", scen_kind);
  scenario->add_option("--holdout", holdout);
  scenario->add_option("--noise", scen_noise);
  scenario->add_option("--snr", snr);

  // suite
  std::string suite_config;
  auto* suite = app.add_subcommand("suite", "Run the full scenario grid");
  suite->add_option("--config", suite_config)->required();

  // report
  std::string report_json, report_csv = "report.csv";
  auto* report = app.add_subcommand("report", "Re-emit a CSV view of a JSON report");
  report->add_option("--json", report_json)->required();
  report->add_option("--out", report_csv);

  // gradcheck
  double gc_scale = 0.25;
  std::size_t gc_batch = 2;
  std::uint64_t gc_seed = 11;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gradcheck->add_option("--scale", gc_scale);
  gradcheck->add_option("--batch", gc_batch);
  gradcheck->add_option("--seed", gc_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(classes, per_class, length, seed, out);
    if (ingest->parsed())
      return cmd_ingest(dir, window, shift, per_class_count, ingest_out);
    if (train->parsed())
      return cmd_train(dataset_path, arch_name, scale, epochs, batch, lr, train_seed,
                       ckpt_out);
    if (scenario->parsed())
      return cmd_scenario(config_path, scen_model, scen_kind, holdout, scen_noise, snr);
    if (suite->parsed()) return cmd_suite(suite_config);
    if (report->parsed()) return cmd_report(report_json, report_csv);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_scale, gc_batch, gc_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
