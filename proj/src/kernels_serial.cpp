#include "fd/kernels.hpp"

namespace fd::kernels::serial {

void conv1d_forward(const Tensor& x, const Tensor& w, std::size_t stride,
                    std::size_t pad_left, std::size_t out_len, Tensor& y) {
  const std::size_t n = x.dim(0), len = x.dim(1), cin = x.dim(2);
  const std::size_t k = w.dim(0), cout = w.dim(2);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < out_len; ++o) {
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
}

void conv1d_backward(const Tensor& x, const Tensor& w, std::size_t stride,
                     std::size_t pad_left, const Tensor& gy, Tensor& gx, Tensor& gw) {
  const std::size_t n = x.dim(0), len = x.dim(1), cin = x.dim(2);
  const std::size_t k = w.dim(0), cout = w.dim(2);
  const std::size_t out_len = gy.dim(1);
  // Input gradient: each gx slot gathers from the output positions that read it.
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < len; ++p) {
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
  }
  // Kernel gradient.
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
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
}

void matmul(const Tensor& x, const Tensor& w, Tensor& y) {
  const std::size_t n = x.dim(0), f = x.dim(1), m = w.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < f; ++t) acc += x.at2(i, t) * w.at2(t, j);
      y.at2(i, j) = acc;
    }
  }
}

void matmul_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                     Tensor& gx, Tensor& gw) {
  const std::size_t n = x.dim(0), f = x.dim(1), m = w.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < f; ++t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += gy.at2(i, j) * w.at2(t, j);
      gx.at2(i, t) = acc;
    }
  }
  for (std::size_t t = 0; t < f; ++t) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += x.at2(i, t) * gy.at2(i, j);
      gw.at2(t, j) = acc;
    }
  }
}

}  // namespace fd::kernels::serial
