#include "fd/noise.hpp"

#include <algorithm>
#include <cmath>

#include "fd/errors.hpp"

namespace fd::noise {

Kind kind_from_string(const std::string& s) {
  if (s == "gaussian") return Kind::Gaussian;
  if (s == "impulse") return Kind::Impulse;
  if (s == "rayleigh") return Kind::Rayleigh;
  if (s == "weibull") return Kind::Weibull;
  throw InvalidSpec("unknown noise kind: " + s);
}

std::string kind_to_string(Kind k) {
  switch (k) {
    case Kind::Gaussian: return "gaussian";
    case Kind::Impulse: return "impulse";
    case Kind::Rayleigh: return "rayleigh";
    case Kind::Weibull: return "weibull";
  }
  return "gaussian";
}

void NoiseSpec::validate() const {
  if (!(impulse_p > 0.0 && impulse_p <= 1.0))
    throw InvalidSpec("impulse_p must lie in (0,1]");
  if (!(weibull_k > 0.0)) throw InvalidSpec("weibull_k must be positive");
  if (!std::isfinite(target_snr_db)) throw InvalidSpec("target_snr_db must be finite");
}

double signal_power(const std::vector<double>& x) {
  if (x.empty()) throw EmptyInput("signal_power of empty vector");
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

double snr_db(double p_signal, double p_noise) {
  if (p_signal <= 0.0 || p_noise <= 0.0)
    throw UndefinedSNR("snr_db requires strictly positive powers");
  return 10.0 * std::log10(p_signal / p_noise);
}

std::vector<double> generate_noise(const NoiseSpec& spec, std::size_t length, Rng& rng) {
  spec.validate();
  if (length < 1) throw InvalidSpec("generate_noise requires length >= 1");
  std::vector<double> v(length);
  for (int attempt = 0; attempt < 8; ++attempt) {
    switch (spec.kind) {
      case Kind::Gaussian:
        for (double& s : v) s = rng.normal();
        break;
      case Kind::Impulse:
        for (double& s : v) {
          if (rng.uniform() < spec.impulse_p)
            s = rng.coin() ? 1.0 : -1.0;
          else
            s = 0.0;
        }
        break;
      case Kind::Rayleigh:
        for (double& s : v) s = (rng.coin() ? 1.0 : -1.0) * rng.rayleigh();
        break;
      case Kind::Weibull:
        for (double& s : v) s = (rng.coin() ? 1.0 : -1.0) * rng.weibull(spec.weibull_k);
        break;
    }
    const double p = signal_power(v);
    if (p > 0.0) {
      const double inv = 1.0 / std::sqrt(p);
      for (double& s : v) s *= inv;
      return v;
    }
  }
  throw DegenerateRealization("noise realization had zero power after 8 attempts");
}

signal::Burst inject_noise(const signal::Burst& burst, const NoiseSpec& spec, Rng& rng) {
  const double p_signal = signal_power(burst.values);
  if (p_signal <= 0.0) throw UndefinedSNR("cannot calibrate SNR for a zero-power burst");
  const double scale = std::sqrt(p_signal / std::pow(10.0, spec.target_snr_db / 10.0));
  const std::vector<double> unit = generate_noise(spec, burst.values.size(), rng);
  signal::Burst out = burst;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += scale * unit[i];
  out.ood = true;
  return out;
}

CorruptionResult corrupt_split(const signal::LabeledDataset& ds, const CorruptionPlan& plan) {
  if (plan.fraction < 0.0 || plan.fraction > 1.0)
    throw InvalidSpec("corruption fraction must lie in [0,1]");
  const std::size_t n = ds.bursts.size();
  const auto n_corrupt = static_cast<std::size_t>(
      std::llround(plan.fraction * static_cast<double>(n)));

  // Partial Fisher-Yates: first n_corrupt slots of a seeded shuffle.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng pick = Rng::derive(plan.seed, {0xC0Du});
  for (std::size_t i = 0; i < n_corrupt && i + 1 < n; ++i) {
    const std::size_t j = i + pick.uniform_below(n - i);
    std::swap(order[i], order[j]);
  }

  CorruptionResult res;
  res.dataset = ds;
  res.ood_mask.assign(n, false);
  for (std::size_t i = 0; i < n_corrupt; ++i) {
    const std::size_t idx = order[i];
    // RNG stream keyed by burst index so results are schedule-independent.
    Rng rng = Rng::derive(plan.seed, {0x401Eu, idx});
    res.dataset.bursts[idx] = inject_noise(ds.bursts[idx], plan.spec, rng);
    res.ood_mask[idx] = true;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!res.ood_mask[i]) res.dataset.bursts[i].ood = false;
  return res;
}

}  // namespace fd::noise
