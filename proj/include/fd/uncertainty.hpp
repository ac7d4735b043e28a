#pragma once

#include <string>
#include <vector>

#include "fd/predictors.hpp"

namespace fd::uncertainty {

// Predictive entropy in nats of the mean prediction row; 0 * ln 0 := 0 via
// probability clamp.
double entropy(const predictors::PredictionMatrix& m);
double entropy_of_mean(const std::vector<double>& mean_probs);

// IQR proximity rule: Q3 + 1.5 * (Q3 - Q1), quartiles by linear interpolation
// at position (n - 1) * q on the sorted values.
double tau1(const std::vector<double>& id_entropies);

// F1-maximizing threshold over the candidate set H_V = the entropy values
// themselves, rule "untrustworthy iff H >= candidate", ties broken by the
// smallest candidate.
double tau2(const std::vector<double>& entropies, const std::vector<bool>& ood_flags);

// flag = (H >= tau)
std::vector<bool> classify_trust(const std::vector<double>& entropies, double tau);

struct TrustConfusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double ood_ut_rate = 0.0;  // tp / (tp + fn), fraction in [0,1]
  double id_ut_rate = 0.0;   // fp / (fp + tn)
};

TrustConfusion confusion(const std::vector<bool>& flags, const std::vector<bool>& ood_truth);

struct ThresholdPair {
  double tau1 = 0.0;
  double tau2 = 0.0;
  // Calibration provenance.
  double q1 = 0.0, q3 = 0.0;
  std::size_t tau2_candidates = 0;
  double tau2_f1 = 0.0;
};

ThresholdPair calibrate(const std::vector<double>& id_entropies,
                        const std::vector<double>& val_entropies,
                        const std::vector<bool>& val_ood);

struct HistogramRow {
  double bin_lo = 0.0, bin_hi = 0.0;
  std::size_t id_count = 0, ood_count = 0;
};

// 50 uniform bins over [0, ln C]; entropies at exactly ln C land in the last bin.
std::vector<HistogramRow> entropy_histogram(const std::vector<double>& entropies,
                                            const std::vector<bool>& ood_flags,
                                            std::size_t num_classes,
                                            std::size_t bins = 50);

void write_histogram_csv(const std::vector<HistogramRow>& rows, const std::string& path);

}  // namespace fd::uncertainty
