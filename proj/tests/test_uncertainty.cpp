#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fd/errors.hpp"
#include "fd/rng.hpp"
#include "fd/uncertainty.hpp"

namespace unc = fd::uncertainty;
namespace pred = fd::predictors;
using fd::Rng;
namespace fs = std::filesystem;

namespace {

// Independent quartile oracle: sort, then linear interpolation at (n-1)*q.
double quantile_oracle(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double tau1_oracle(const std::vector<double>& v) {
  const double q1 = quantile_oracle(v, 0.25);
  const double q3 = quantile_oracle(v, 0.75);
  return q3 + 1.5 * (q3 - q1);
}

double f1_at(const std::vector<double>& h, const std::vector<bool>& ood, double cand) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const bool flag = h[i] >= cand;
    if (flag && ood[i]) ++tp;
    if (flag && !ood[i]) ++fp;
    if (!flag && ood[i]) ++fn;
  }
  const double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
  const double rec = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
  return prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
}

// Independent brute-force tau2 oracle: best F1 over all candidates, then the
// smallest candidate achieving it.
double tau2_oracle(const std::vector<double>& h, const std::vector<bool>& ood) {
  double best_f1 = -1.0, best = 0.0;
  std::vector<double> cands = h;
  std::sort(cands.begin(), cands.end());
  for (double c : cands) {
    const double f1 = f1_at(h, ood, c);
    if (f1 > best_f1 + 1e-15) {
      best_f1 = f1;
      best = c;
    }
  }
  return best;
}

pred::PredictionMatrix matrix_of_rows(const std::vector<std::vector<double>>& rows) {
  pred::PredictionMatrix m;
  m.K = rows.size();
  m.C = rows[0].size();
  m.probs = fd::Tensor({m.K, m.C});
  for (std::size_t k = 0; k < m.K; ++k)
    for (std::size_t c = 0; c < m.C; ++c) m.probs.at2(k, c) = rows[k][c];
  return m;
}

}  // namespace

TEST_CASE("entropy exact values") {
  auto uniform6 = matrix_of_rows({std::vector<double>(6, 1.0 / 6.0)});
  CHECK(unc::entropy(uniform6) == doctest::Approx(std::log(6.0)).epsilon(1e-9));

  auto onehot = matrix_of_rows({{0.0, 1.0, 0.0}});
  CHECK(unc::entropy(onehot) == doctest::Approx(0.0).epsilon(1e-9));

  // Rows (0.5, 0.5) and (1, 0): mean (0.75, 0.25) -> H ~ 0.562335.
  auto two = matrix_of_rows({{0.5, 0.5}, {1.0, 0.0}});
  CHECK(unc::entropy(two) == doctest::Approx(0.5623).epsilon(1e-4));
  CHECK(unc::entropy_of_mean({0.75, 0.25}) == doctest::Approx(0.562335).epsilon(1e-5));
}

TEST_CASE("entropy bounds on random simplex rows") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.uniform_below(8);
    const std::size_t c = 2 + rng.uniform_below(8);
    std::vector<std::vector<double>> rows(k, std::vector<double>(c));
    for (auto& row : rows) {
      double s = 0.0;
      for (double& v : row) {
        v = rng.uniform_open0();
        s += v;
      }
      for (double& v : row) v /= s;
    }
    const double h = unc::entropy(matrix_of_rows(rows));
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(c)) + 1e-9);
  }
}

TEST_CASE("tau1 worked example and degenerate cases") {
  CHECK(unc::tau1({0.1, 0.2, 0.3, 0.4}) == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(unc::tau1({0.7, 0.7, 0.7}) == doctest::Approx(0.7));
  CHECK(unc::tau1({0.42}) == doctest::Approx(0.42));
  CHECK_THROWS_AS(unc::tau1({}), fd::EmptyInput);
}

TEST_CASE("tau1 equals the independent quartile oracle on 1000 random sets") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_below(50);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform() * 2.0;
    CHECK(unc::tau1(v) == tau1_oracle(v));
  }
}

TEST_CASE("tau2 worked examples") {
  // ID {0.1, 0.2}, OOD {0.8, 0.9}: candidate 0.8 gives F1 = 1.
  CHECK(unc::tau2({0.1, 0.2, 0.8, 0.9}, {false, false, true, true}) ==
        doctest::Approx(0.8));
  // All OOD: flagging everything is optimal; smallest candidate wins.
  CHECK(unc::tau2({0.3, 0.5, 0.4}, {true, true, true}) == doctest::Approx(0.3));
  // Duplicated candidate with equal max F1: the smaller value is returned.
  CHECK(unc::tau2({0.2, 0.2, 0.9}, {false, true, true}) == doctest::Approx(0.2));
  CHECK_THROWS_AS(unc::tau2({0.1, 0.2}, {false, false}), fd::NoPositives);
}

TEST_CASE("tau2 equals exhaustive brute force on 1000 random sets") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.uniform_below(199);
    std::vector<double> h(n);
    std::vector<bool> ood(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid of values makes F1 ties common, stressing the tie-break.
      h[i] = 0.1 * static_cast<double>(rng.uniform_below(12));
      ood[i] = rng.uniform() < 0.3;
      any = any || ood[i];
    }
    if (!any) ood[rng.uniform_below(n)] = true;
    CHECK(unc::tau2(h, ood) == tau2_oracle(h, ood));
  }
}

TEST_CASE("classify_trust uses H >= tau, inclusive") {
  auto flags = unc::classify_trust({0.4, 0.5, 0.6}, 0.5);
  CHECK(flags == std::vector<bool>{false, true, true});
  CHECK(unc::classify_trust({0.1, 0.9}, 100.0) == std::vector<bool>{false, false});
  CHECK(unc::classify_trust({0.1, 0.9}, 0.0) == std::vector<bool>{true, true});
}

TEST_CASE("threshold monotonicity: raising tau never flags more") {
  Rng rng(13);
  std::vector<double> h(100);
  for (double& x : h) x = rng.uniform();
  std::size_t prev = 101;
  for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
    const auto flags = unc::classify_trust(h, tau);
    const std::size_t count = std::count(flags.begin(), flags.end(), true);
    CHECK(count <= prev);
    prev = count;
  }
}

TEST_CASE("confusion hand example and conventions") {
  // 8 TP, 2 FP, 2 FN, 88 TN.
  std::vector<bool> flags, truth;
  for (int i = 0; i < 8; ++i) { flags.push_back(true); truth.push_back(true); }
  for (int i = 0; i < 2; ++i) { flags.push_back(true); truth.push_back(false); }
  for (int i = 0; i < 2; ++i) { flags.push_back(false); truth.push_back(true); }
  for (int i = 0; i < 88; ++i) { flags.push_back(false); truth.push_back(false); }
  auto c = unc::confusion(flags, truth);
  CHECK(c.tp == 8);
  CHECK(c.fp == 2);
  CHECK(c.fn == 2);
  CHECK(c.tn == 88);
  CHECK(c.precision == doctest::Approx(0.8));
  CHECK(c.recall == doctest::Approx(0.8));
  CHECK(c.f1 == doctest::Approx(0.8));
  CHECK(c.ood_ut_rate == doctest::Approx(0.8));
  CHECK(c.id_ut_rate == doctest::Approx(2.0 / 90.0));

  // Perfect separation.
  auto p = unc::confusion({true, false}, {true, false});
  CHECK(p.f1 == doctest::Approx(1.0));
  CHECK(p.id_ut_rate == doctest::Approx(0.0));

  // Zero predicted positives with OOD present: precision := 0, F1 := 0.
  auto z = unc::confusion({false, false}, {true, false});
  CHECK(z.precision == 0.0);
  CHECK(z.f1 == 0.0);

  CHECK_THROWS_AS(unc::confusion({true}, {true, false}), fd::LengthMismatch);
}

TEST_CASE("counting consistency on random confusions") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_below(100);
    std::vector<bool> flags(n), truth(n);
    std::size_t n_ood = 0;
    for (std::size_t i = 0; i < n; ++i) {
      flags[i] = rng.coin();
      truth[i] = rng.coin();
      if (truth[i]) ++n_ood;
    }
    auto c = unc::confusion(flags, truth);
    CHECK(c.tp + c.fn == n_ood);
    CHECK(c.fp + c.tn == n - n_ood);
    CHECK(c.tp + c.fp + c.fn + c.tn == n);
  }
}

TEST_CASE("calibrate returns both thresholds with provenance") {
  const std::vector<double> id_val{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> val{0.1, 0.2, 0.3, 0.4, 0.8, 0.9};
  const std::vector<bool> ood{false, false, false, false, true, true};
  auto pair = unc::calibrate(id_val, val, ood);
  CHECK(pair.tau1 == doctest::Approx(0.55));
  CHECK(pair.tau2 == doctest::Approx(0.8));
  CHECK(pair.q1 == doctest::Approx(0.175));
  CHECK(pair.q3 == doctest::Approx(0.325));
  CHECK(pair.tau2_candidates == 6);
  CHECK(pair.tau2_f1 == doctest::Approx(1.0));
}

TEST_CASE("entropy histogram bins cover [0, ln C] and preserve counts") {
  const std::size_t c = 4;
  std::vector<double> h{0.0, 0.1, 0.5, std::log(4.0), 1.0, 1.2};
  std::vector<bool> ood{false, false, true, true, false, true};
  auto rows = unc::entropy_histogram(h, ood, c);
  REQUIRE(rows.size() == 50);
  CHECK(rows.front().bin_lo == doctest::Approx(0.0));
  CHECK(rows.back().bin_hi == doctest::Approx(std::log(4.0)));
  std::size_t id_total = 0, ood_total = 0;
  for (const auto& r : rows) {
    id_total += r.id_count;
    ood_total += r.ood_count;
  }
  CHECK(id_total == 3);
  CHECK(ood_total == 3);
  // The exact ln C value lands in the last bin, not past the end.
  CHECK(rows.back().ood_count >= 1);
}

TEST_CASE("histogram csv has the documented schema") {
  auto rows = unc::entropy_histogram({0.5, 1.0}, {false, true}, 3);
  const auto path = (fs::temp_directory_path() / "fd_hist.csv").string();
  unc::write_histogram_csv(rows, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "bin_lo,bin_hi,id_count,ood_count");
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 50);
  fs::remove(path);
}
