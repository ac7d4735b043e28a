#include "fd/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fd/errors.hpp"
#include "fd/ops.hpp"

namespace fd::uncertainty {

double entropy_of_mean(const std::vector<double>& mean_probs) {
  double h = 0.0;
  for (double p : mean_probs) {
    const double q = std::max(p, ops::kProbClamp);
    h -= p * std::log(q);
  }
  return std::max(h, 0.0);
}

double entropy(const predictors::PredictionMatrix& m) {
  return entropy_of_mean(predictors::mean_dist(m));
}

namespace {
// Linear-interpolation quantile at position (n - 1) * q on sorted data.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = static_cast<double>(n - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct F1Counts {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

F1Counts f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  F1Counts out;
  out.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}
}  // namespace

double tau1(const std::vector<double>& id_entropies) {
  if (id_entropies.empty()) throw EmptyInput("tau1 needs at least one entropy value");
  for (double h : id_entropies)
    if (!std::isfinite(h)) throw NonFiniteValue("tau1 input contains non-finite entropy");
  std::vector<double> sorted = id_entropies;
  std::sort(sorted.begin(), sorted.end());
  const double q1 = quantile_sorted(sorted, 0.25);
  const double q3 = quantile_sorted(sorted, 0.75);
  return q3 + 1.5 * (q3 - q1);
}

double tau2(const std::vector<double>& entropies, const std::vector<bool>& ood_flags) {
  if (entropies.size() != ood_flags.size())
    throw LengthMismatch("tau2: entropies vs ood flags");
  const std::size_t n = entropies.size();
  std::size_t total_ood = 0;
  for (bool f : ood_flags) total_ood += f ? 1 : 0;
  if (total_ood == 0) throw NoPositives("tau2 requires at least one OOD example");

  double best_tau = 0.0, best_f1 = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cand = entropies[i];
    std::size_t tp = 0, fp = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (entropies[j] >= cand) {
        if (ood_flags[j])
          ++tp;
        else
          ++fp;
      }
    }
    const double f1 = f1_from_counts(tp, fp, total_ood - tp).f1;
    if (f1 > best_f1 || (f1 == best_f1 && cand < best_tau)) {
      best_f1 = f1;
      best_tau = cand;
    }
  }
  return best_tau;
}

std::vector<bool> classify_trust(const std::vector<double>& entropies, double tau) {
  if (!std::isfinite(tau)) throw NonFiniteValue("classify_trust: tau must be finite");
  std::vector<bool> flags(entropies.size());
  for (std::size_t i = 0; i < entropies.size(); ++i) flags[i] = entropies[i] >= tau;
  return flags;
}

TrustConfusion confusion(const std::vector<bool>& flags, const std::vector<bool>& ood_truth) {
  if (flags.size() != ood_truth.size()) throw LengthMismatch("confusion: flags vs truth");
  TrustConfusion c;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (ood_truth[i])
      flags[i] ? ++c.tp : ++c.fn;
    else
      flags[i] ? ++c.fp : ++c.tn;
  }
  const F1Counts f = f1_from_counts(c.tp, c.fp, c.fn);
  c.precision = f.precision;
  c.recall = f.recall;
  c.f1 = f.f1;
  c.ood_ut_rate = (c.tp + c.fn) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  c.id_ut_rate = (c.fp + c.tn) ? static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn) : 0.0;
  return c;
}

ThresholdPair calibrate(const std::vector<double>& id_entropies,
                        const std::vector<double>& val_entropies,
                        const std::vector<bool>& val_ood) {
  ThresholdPair out;
  std::vector<double> sorted = id_entropies;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.empty()) throw EmptyInput("calibrate: no ID entropies");
  out.q1 = quantile_sorted(sorted, 0.25);
  out.q3 = quantile_sorted(sorted, 0.75);
  out.tau1 = out.q3 + 1.5 * (out.q3 - out.q1);
  out.tau2 = tau2(val_entropies, val_ood);
  out.tau2_candidates = val_entropies.size();
  const TrustConfusion c = confusion(classify_trust(val_entropies, out.tau2), val_ood);
  out.tau2_f1 = c.f1;
  return out;
}

std::vector<HistogramRow> entropy_histogram(const std::vector<double>& entropies,
                                            const std::vector<bool>& ood_flags,
                                            std::size_t num_classes, std::size_t bins) {
  if (entropies.size() != ood_flags.size())
    throw LengthMismatch("entropy_histogram: entropies vs flags");
  const double h_max = std::log(static_cast<double>(num_classes));
  std::vector<HistogramRow> rows(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    rows[b].bin_lo = h_max * static_cast<double>(b) / static_cast<double>(bins);
    rows[b].bin_hi = h_max * static_cast<double>(b + 1) / static_cast<double>(bins);
  }
  for (std::size_t i = 0; i < entropies.size(); ++i) {
    double r = entropies[i] / h_max * static_cast<double>(bins);
    auto b = static_cast<std::size_t>(std::max(r, 0.0));
    if (b >= bins) b = bins - 1;
    if (ood_flags[i])
      ++rows[b].ood_count;
    else
      ++rows[b].id_count;
  }
  return rows;
}

void write_histogram_csv(const std::vector<HistogramRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "bin_lo,bin_hi,id_count,ood_count\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%zu,%zu\n", r.bin_lo, r.bin_hi,
                  r.id_count, r.ood_count);
    out << buf;
  }
}

}  // namespace fd::uncertainty
