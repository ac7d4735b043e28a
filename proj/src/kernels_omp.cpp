#include "fd/kernels.hpp"

// Parallel variants. Each loop iteration owns a disjoint slice of the output,
// and the accumulation inside one slot stays sequential, so the results are
// bit-identical to the serial reference for any thread count.

namespace fd::kernels::omp {

void conv1d_forward(const Tensor& x, const Tensor& w, std::size_t stride,
                    std::size_t pad_left, std::size_t out_len, Tensor& y) {
  const std::size_t n = x.dim(0), len = x.dim(1), cin = x.dim(2);
  const std::size_t k = w.dim(0), cout = w.dim(2);
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(n * out_len);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
    const std::size_t b = static_cast<std::size_t>(idx) / out_len;
    const std::size_t o = static_cast<std::size_t>(idx) % out_len;
    const std::ptrdiff_t start =
        static_cast<std::ptrdiff_t>(o * stride) - static_cast<std::ptrdiff_t>(pad_left);
    for (std::size_t co = 0; co < cout; ++co) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t pos = start + static_cast<std::ptrdiff_t>(j);
        if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
        for (std::size_t ci = 0; ci < cin; ++ci)
          acc += x.at3(b, static_cast<std::size_t>(pos), ci) * w.at3(j, ci, co);
      }
      y.at3(b, o, co) = acc;
    }
  }
}

void conv1d_backward(const Tensor& x, const Tensor& w, std::size_t stride,
                     std::size_t pad_left, const Tensor& gy, Tensor& gx, Tensor& gw) {
  const std::size_t n = x.dim(0), len = x.dim(1), cin = x.dim(2);
  const std::size_t k = w.dim(0), cout = w.dim(2);
  const std::size_t out_len = gy.dim(1);
  const std::ptrdiff_t gx_total = static_cast<std::ptrdiff_t>(n * len);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < gx_total; ++idx) {
    const std::size_t b = static_cast<std::size_t>(idx) / len;
    const std::size_t p = static_cast<std::size_t>(idx) % len;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t num =
            static_cast<std::ptrdiff_t>(p + pad_left) - static_cast<std::ptrdiff_t>(j);
        if (num < 0 || num % static_cast<std::ptrdiff_t>(stride) != 0) continue;
        const std::size_t o = static_cast<std::size_t>(num) / stride;
        if (o >= out_len) continue;
        for (std::size_t co = 0; co < cout; ++co)
          acc += gy.at3(b, o, co) * w.at3(j, ci, co);
      }
      gx.at3(b, p, ci) = acc;
    }
  }
  const std::ptrdiff_t gw_total = static_cast<std::ptrdiff_t>(k * cin);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < gw_total; ++idx) {
    const std::size_t j = static_cast<std::size_t>(idx) / cin;
    const std::size_t ci = static_cast<std::size_t>(idx) % cin;
    for (std::size_t co = 0; co < cout; ++co) {
      double acc = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t o = 0; o < out_len; ++o) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(o * stride + j) -
                                     static_cast<std::ptrdiff_t>(pad_left);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
          acc += gy.at3(b, o, co) * x.at3(b, static_cast<std::size_t>(pos), ci);
        }
      }
      gw.at3(j, ci, co) = acc;
    }
  }
}

void matmul(const Tensor& x, const Tensor& w, Tensor& y) {
  const std::size_t f = x.dim(1), m = w.dim(1);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.dim(0));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < f; ++t)
        acc += x.at2(static_cast<std::size_t>(i), t) * w.at2(t, j);
      y.at2(static_cast<std::size_t>(i), j) = acc;
    }
  }
}

void matmul_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                     Tensor& gx, Tensor& gw) {
  const std::size_t f = x.dim(1), m = w.dim(1);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.dim(0));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < f; ++t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        acc += gy.at2(static_cast<std::size_t>(i), j) * w.at2(t, j);
      gx.at2(static_cast<std::size_t>(i), t) = acc;
    }
  }
  const std::ptrdiff_t ft = static_cast<std::ptrdiff_t>(f);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < ft; ++t) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.dim(0); ++i)
        acc += x.at2(i, static_cast<std::size_t>(t)) * gy.at2(i, j);
      gw.at2(static_cast<std::size_t>(t), j) = acc;
    }
  }
}

}  // namespace fd::kernels::omp

namespace fd::kernels {

namespace {
Backend g_backend = Backend::OpenMP;
}

void set_backend(Backend b) { g_backend = b; }
Backend backend() { return g_backend; }

void conv1d_forward(const Tensor& x, const Tensor& w, std::size_t stride,
                    std::size_t pad_left, std::size_t out_len, Tensor& y) {
  if (g_backend == Backend::OpenMP)
    omp::conv1d_forward(x, w, stride, pad_left, out_len, y);
  else
    serial::conv1d_forward(x, w, stride, pad_left, out_len, y);
}

void conv1d_backward(const Tensor& x, const Tensor& w, std::size_t stride,
                     std::size_t pad_left, const Tensor& gy, Tensor& gx, Tensor& gw) {
  if (g_backend == Backend::OpenMP)
    omp::conv1d_backward(x, w, stride, pad_left, gy, gx, gw);
  else
    serial::conv1d_backward(x, w, stride, pad_left, gy, gx, gw);
}

void matmul(const Tensor& x, const Tensor& w, Tensor& y) {
  if (g_backend == Backend::OpenMP)
    omp::matmul(x, w, y);
  else
    serial::matmul(x, w, y);
}

void matmul_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                     Tensor& gx, Tensor& gw) {
  if (g_backend == Backend::OpenMP)
    omp::matmul_backward(x, w, gy, gx, gw);
  else
    serial::matmul_backward(x, w, gy, gx, gw);
}

}  // namespace fd::kernels
