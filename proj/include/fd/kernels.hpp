#pragma once

#include <cstddef>

#include "fd/tensor.hpp"

namespace fd::kernels {

// The compute-heavy inner loops live here in two interchangeable variants:
// a serial reference and an OpenMP one. Both partition work over independent
// output (or gradient) slots only, so results are bit-identical regardless
// of backend or thread count. The serial variant is kept as the oracle for
// tests and for the kernel benchmark.

enum class Backend { Serial, OpenMP };

void set_backend(Backend b);
Backend backend();

// x: [N, L, Cin], w: [k, Cin, Cout] -> y: [N, Lout, Cout]
// Cross-correlation with zero padding of pad_left on the left; positions
// outside [0, L) read as zero.
void conv1d_forward(const Tensor& x, const Tensor& w, std::size_t stride,
                    std::size_t pad_left, std::size_t out_len, Tensor& y);
void conv1d_backward(const Tensor& x, const Tensor& w, std::size_t stride,
                     std::size_t pad_left, const Tensor& gy, Tensor& gx, Tensor& gw);

// x: [N, F], w: [F, M] -> y: [N, M] (y must be pre-sized; bias added by caller)
void matmul(const Tensor& x, const Tensor& w, Tensor& y);
// gy: [N, M] -> gx: [N, F], gw: [F, M]
void matmul_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                     Tensor& gx, Tensor& gw);

namespace serial {
void conv1d_forward(const Tensor& x, const Tensor& w, std::size_t stride,
                    std::size_t pad_left, std::size_t out_len, Tensor& y);
void conv1d_backward(const Tensor& x, const Tensor& w, std::size_t stride,
                     std::size_t pad_left, const Tensor& gy, Tensor& gx, Tensor& gw);
void matmul(const Tensor& x, const Tensor& w, Tensor& y);
void matmul_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                     Tensor& gx, Tensor& gw);
}  // namespace serial

namespace omp {
void conv1d_forward(const Tensor& x, const Tensor& w, std::size_t stride,
                    std::size_t pad_left, std::size_t out_len, Tensor& y);
void conv1d_backward(const Tensor& x, const Tensor& w, std::size_t stride,
                     std::size_t pad_left, const Tensor& gy, Tensor& gx, Tensor& gw);
void matmul(const Tensor& x, const Tensor& w, Tensor& y);
void matmul_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                     Tensor& gx, Tensor& gw);
}  // namespace omp

}  // namespace fd::kernels
