#pragma once

// Dense numeric kernels behind the autograd engine. Every kernel exists
// twice: `serial::` is the direct loop reference used by the tests,
// `parallel::` is what the engine calls: OpenMP im2col/col2im feeding
// Eigen's blocked (OpenMP-threaded) GEMM. Each output element is owned by
// one thread, so results are bit-identical across runs at a fixed thread
// count.

#include <cstddef>

namespace cmsep::kernels {

enum class Padding { Same, Valid };

struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t in_h = 0, in_w = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad_top = 0, pad_left = 0;
  std::size_t out_h = 0, out_w = 0;
};

// SAME pads so out = ceil(in / stride), splitting odd padding as
// (floor, ceil) on (leading, trailing) edges. VALID pads nothing. Throws
// std::invalid_argument if the kernel does not fit.
ConvGeometry conv_geometry(std::size_t in_channels, std::size_t out_channels, std::size_t in_h,
                           std::size_t in_w, std::size_t kernel, std::size_t stride,
                           Padding padding);

// Layouts: input [Cin, H, W], weights [Cout, Cin, k, k], output [Cout, H', W'].
// Forward overwrites `out`; backward kernels accumulate into their outputs.
// `bias` / `grad_bias` may be null.
// gemm computes C (+)= op(A) * op(B) with op(A) m x k and op(B) k x n,
// row-major, where op transposes when the flag is set.

namespace serial {
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weights, const T* bias, T* out);
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* grad_out, const T* weights,
                           T* grad_in);
template <typename T>
void conv2d_backward_weights(const ConvGeometry& g, const T* in, const T* grad_out,
                             T* grad_weights, T* grad_bias);
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate);
}  // namespace serial

namespace parallel {
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weights, const T* bias, T* out);
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* grad_out, const T* weights,
                           T* grad_in);
template <typename T>
void conv2d_backward_weights(const ConvGeometry& g, const T* in, const T* grad_out,
                             T* grad_weights, T* grad_bias);
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate);
}  // namespace parallel

}  // namespace cmsep::kernels
