#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fd/kernels.hpp"
#include "fd/rng.hpp"

using fd::Rng;
using fd::Tensor;
namespace kn = fd::kernels;

namespace {
void fill_normal(Tensor& t, Rng& rng) {
  for (double& v : t.data) v = rng.normal();
}
}  // namespace

TEST_CASE("conv1d forward: OpenMP backend is bit-identical to serial") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.uniform_below(4);
    const std::size_t cin = 1 + rng.uniform_below(5);
    const std::size_t cout = 1 + rng.uniform_below(6);
    const std::size_t k = 1 + rng.uniform_below(7);
    const std::size_t stride = 1 + rng.uniform_below(3);
    const std::size_t l = k + rng.uniform_below(30);
    const std::size_t pad_left = rng.uniform_below(k);
    const std::size_t out_len = 1 + (l + pad_left - k) / stride;

    Tensor x({n, l, cin}), w({k, cin, cout});
    fill_normal(x, rng);
    fill_normal(w, rng);
    Tensor ys({n, out_len, cout}), yo({n, out_len, cout});
    kn::serial::conv1d_forward(x, w, stride, pad_left, out_len, ys);
    kn::omp::conv1d_forward(x, w, stride, pad_left, out_len, yo);
    CHECK(ys.data == yo.data);

    Tensor gy({n, out_len, cout});
    fill_normal(gy, rng);
    Tensor gxs({n, l, cin}), gws({k, cin, cout});
    Tensor gxo({n, l, cin}), gwo({k, cin, cout});
    kn::serial::conv1d_backward(x, w, stride, pad_left, gy, gxs, gws);
    kn::omp::conv1d_backward(x, w, stride, pad_left, gy, gxo, gwo);
    CHECK(gxs.data == gxo.data);
    CHECK(gws.data == gwo.data);
  }
}

TEST_CASE("matmul: OpenMP backend is bit-identical to serial") {
  Rng rng(202);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.uniform_below(8);
    const std::size_t f = 1 + rng.uniform_below(16);
    const std::size_t m = 1 + rng.uniform_below(16);
    Tensor x({n, f}), w({f, m});
    fill_normal(x, rng);
    fill_normal(w, rng);
    Tensor ys({n, m}), yo({n, m});
    kn::serial::matmul(x, w, ys);
    kn::omp::matmul(x, w, yo);
    CHECK(ys.data == yo.data);

    Tensor gy({n, m});
    fill_normal(gy, rng);
    Tensor gxs({n, f}), gws({f, m}), gxo({n, f}), gwo({f, m});
    kn::serial::matmul_backward(x, w, gy, gxs, gws);
    kn::omp::matmul_backward(x, w, gy, gxo, gwo);
    CHECK(gxs.data == gxo.data);
    CHECK(gws.data == gwo.data);
  }
}

TEST_CASE("runtime backend switch routes to the same results") {
  Rng rng(303);
  Tensor x({2, 6}), w({6, 3});
  fill_normal(x, rng);
  fill_normal(w, rng);

  const kn::Backend original = kn::backend();
  Tensor y_serial({2, 3}), y_omp({2, 3});
  kn::set_backend(kn::Backend::Serial);
  CHECK(kn::backend() == kn::Backend::Serial);
  kn::matmul(x, w, y_serial);
  kn::set_backend(kn::Backend::OpenMP);
  CHECK(kn::backend() == kn::Backend::OpenMP);
  kn::matmul(x, w, y_omp);
  kn::set_backend(original);
  CHECK(y_serial.data == y_omp.data);
}
