#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fd/rng.hpp"
#include "fd/signal.hpp"

namespace fd::noise {

enum class Kind { Gaussian, Impulse, Rayleigh, Weibull };

Kind kind_from_string(const std::string& s);
std::string kind_to_string(Kind k);

struct NoiseSpec {
  Kind kind = Kind::Gaussian;
  double target_snr_db = 0.0;
  double impulse_p = 0.05;  // spike occurrence probability
  double weibull_k = 2.0;   // shape

  void validate() const;
};

struct CorruptionPlan {
  double fraction = 0.20;
  std::uint64_t seed = 0;
  NoiseSpec spec;
};

// Mean of squared samples.
double signal_power(const std::vector<double>& x);

// 10 * log10(p_signal / p_noise); throws UndefinedSNR on zero power.
double snr_db(double p_signal, double p_noise);

// Zero-mean-constructed noise realization rescaled to empirical power exactly 1.
// Gaussian: standard normal. Impulse: +-A with probability p, else 0, sign
// equiprobable. Rayleigh / Weibull: positive magnitude times equiprobable sign.
std::vector<double> generate_noise(const NoiseSpec& spec, std::size_t length, Rng& rng);

// burst + scale * unit_noise with scale = sqrt(P_signal / 10^(SNR_dB/10));
// result flagged ood = true.
signal::Burst inject_noise(const signal::Burst& burst, const NoiseSpec& spec, Rng& rng);

struct CorruptionResult {
  signal::LabeledDataset dataset;
  std::vector<bool> ood_mask;  // aligned with dataset order
};

// Replaces exactly round(fraction * n) bursts, chosen by seeded uniform draw
// without replacement, with their noisy versions.
CorruptionResult corrupt_split(const signal::LabeledDataset& ds, const CorruptionPlan& plan);

}  // namespace fd::noise
