// Benchmark: serial vs OpenMP kernel backends for conv1d and matmul.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include <CLI11.hpp>

#include "fd/kernels.hpp"
#include "fd/rng.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, std::size_t reps) {
  fn();  // warm-up
  const auto t0 = clock_type::now();
  for (std::size_t i = 0; i < reps; ++i) fn();
  const auto t1 = clock_type::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() /
         static_cast<double>(reps);
}

double max_abs_diff(const fd::Tensor& a, const fd::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

void fill_normal(fd::Tensor& t, fd::Rng& rng) {
  for (double& v : t.data) v = rng.normal();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel backend benchmark (serial vs OpenMP)"};
  std::size_t batch = 16, length = 512, in_ch = 16, out_ch = 32, kernel = 9;
  std::size_t m = 256, k = 256, n = 256;
  std::size_t reps = 5;
  app.add_option("--batch", batch);
  app.add_option("--length", length);
  app.add_option("--in-ch", in_ch);
  app.add_option("--out-ch", out_ch);
  app.add_option("--kernel", kernel);
  app.add_option("--m", m);
  app.add_option("--k", k);
  app.add_option("--n", n);
  app.add_option("--reps", reps);
  CLI11_PARSE(app, argc, argv);

  fd::Rng rng = fd::Rng::derive(123, {0xBE7Cu});

  // conv1d forward + backward (stride 1, no padding).
  const std::size_t out_len = length - kernel + 1;
  fd::Tensor x({batch, length, in_ch}), w({kernel, in_ch, out_ch});
  fill_normal(x, rng);
  fill_normal(w, rng);
  fd::Tensor y_s({batch, out_len, out_ch}), y_o({batch, out_len, out_ch});
  fd::Tensor gy({batch, out_len, out_ch});
  fill_normal(gy, rng);
  fd::Tensor gx_s({batch, length, in_ch}), gw_s({kernel, in_ch, out_ch});
  fd::Tensor gx_o({batch, length, in_ch}), gw_o({kernel, in_ch, out_ch});

  const double conv_s_ms = time_ms(
      [&] { fd::kernels::serial::conv1d_forward(x, w, 1, 0, out_len, y_s); }, reps);
  const double conv_o_ms =
      time_ms([&] { fd::kernels::omp::conv1d_forward(x, w, 1, 0, out_len, y_o); }, reps);
  const double convb_s_ms = time_ms(
      [&] { fd::kernels::serial::conv1d_backward(x, w, 1, 0, gy, gx_s, gw_s); }, reps);
  const double convb_o_ms = time_ms(
      [&] { fd::kernels::omp::conv1d_backward(x, w, 1, 0, gy, gx_o, gw_o); }, reps);

  // matmul forward + backward.
  fd::Tensor a({m, k}), b({k, n}), c_s({m, n}), c_o({m, n});
  fill_normal(a, rng);
  fill_normal(b, rng);
  fd::Tensor gc({m, n});
  fill_normal(gc, rng);
  fd::Tensor ga_s({m, k}), gb_s({k, n}), ga_o({m, k}), gb_o({k, n});

  const double mm_s_ms = time_ms([&] { fd::kernels::serial::matmul(a, b, c_s); }, reps);
  const double mm_o_ms = time_ms([&] { fd::kernels::omp::matmul(a, b, c_o); }, reps);
  const double mmb_s_ms = time_ms(
      [&] { fd::kernels::serial::matmul_backward(a, b, gc, ga_s, gb_s); }, reps);
  const double mmb_o_ms =
      time_ms([&] { fd::kernels::omp::matmul_backward(a, b, gc, ga_o, gb_o); }, reps);

  const double conv_diff =
      std::max({max_abs_diff(y_s, y_o), max_abs_diff(gx_s, gx_o), max_abs_diff(gw_s, gw_o)});
  const double mm_diff =
      std::max({max_abs_diff(c_s, c_o), max_abs_diff(ga_s, ga_o), max_abs_diff(gb_s, gb_o)});

  std::printf("kernel            serial_ms    omp_ms   speedup   max_abs_diff\n");
  std::printf("conv1d_forward    %9.3f %9.3f   %6.2fx   %e\n", conv_s_ms, conv_o_ms,
              conv_s_ms / conv_o_ms, max_abs_diff(y_s, y_o));
  std::printf("conv1d_backward   %9.3f %9.3f   %6.2fx   %e\n", convb_s_ms, convb_o_ms,
              convb_s_ms / convb_o_ms,
              std::max(max_abs_diff(gx_s, gx_o), max_abs_diff(gw_s, gw_o)));
  std::printf("matmul            %9.3f %9.3f   %6.2fx   %e\n", mm_s_ms, mm_o_ms,
              mm_s_ms / mm_o_ms, max_abs_diff(c_s, c_o));
  std::printf("matmul_backward   %9.3f %9.3f   %6.2fx   %e\n", mmb_s_ms, mmb_o_ms,
              mmb_s_ms / mmb_o_ms,
              std::max(max_abs_diff(ga_s, ga_o), max_abs_diff(gb_s, gb_o)));
  return (conv_diff == 0.0 && mm_diff == 0.0) ? 0 : 1;
}
