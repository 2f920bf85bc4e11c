#pragma once

// Batch kernels used by the network core. Two implementations share one
// interface: the default namespace is OpenMP-parallel over example rows, and
// `kernels::serial` is the straightforward reference kept for testing and
// benchmarking.
//
// Reductions over rows (parameter gradients, sums) are split into fixed-size
// row chunks whose partial results are combined in chunk order, so the
// parallel result does not depend on the thread count.

#include <cmath>
#include <cstddef>
#include <span>

namespace frtrain::kernels {

inline constexpr std::size_t kReductionChunk = 128;

struct AffineShape {
  std::size_t rows = 0;     // batch size
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
};

// out[r, o] = sum_i in[r, i] * weight[o, i] + bias[o]. weight is out_dim x in_dim.
void affine_forward(const AffineShape& shape, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out);

// Accumulates grad_weight += grad_outᵀ·in and grad_bias += column sums of grad_out.
// When grad_in is non-empty it is overwritten with grad_out·weight.
void affine_backward(const AffineShape& shape, std::span<const double> in, std::span<const double> grad_out,
                     std::span<const double> weight, std::span<double> grad_weight, std::span<double> grad_bias,
                     std::span<double> grad_in);

void relu_forward(std::span<const double> pre, std::span<double> out);
void tanh_forward(std::span<const double> pre, std::span<double> out);
void sigmoid_forward(std::span<const double> pre, std::span<double> out);
// Row-wise softmax over `cols` columns.
void softmax_forward(std::span<const double> pre, std::size_t cols, std::span<double> out);

double sum(std::span<const double> values);

namespace serial {

void affine_forward(const AffineShape& shape, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out);
void affine_backward(const AffineShape& shape, std::span<const double> in, std::span<const double> grad_out,
                     std::span<const double> weight, std::span<double> grad_weight, std::span<double> grad_bias,
                     std::span<double> grad_in);
void relu_forward(std::span<const double> pre, std::span<double> out);
void tanh_forward(std::span<const double> pre, std::span<double> out);
void sigmoid_forward(std::span<const double> pre, std::span<double> out);
void softmax_forward(std::span<const double> pre, std::size_t cols, std::span<double> out);
double sum(std::span<const double> values);

}  // namespace serial

// Numerically stable logistic function shared by both implementations.
inline double sigmoid(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace frtrain::kernels
