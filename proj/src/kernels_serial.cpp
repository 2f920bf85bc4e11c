#include <algorithm>
#include <cmath>

#include "frtrain/kernels.hpp"

namespace frtrain::kernels::serial {

void affine_forward(const AffineShape& shape, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out) {
  for (std::size_t r = 0; r < shape.rows; ++r) {
    for (std::size_t o = 0; o < shape.out_dim; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < shape.in_dim; ++i) {
        acc += weight[o * shape.in_dim + i] * in[r * shape.in_dim + i];
      }
      out[r * shape.out_dim + o] = acc;
    }
  }
}

void affine_backward(const AffineShape& shape, std::span<const double> in, std::span<const double> grad_out,
                     std::span<const double> weight, std::span<double> grad_weight, std::span<double> grad_bias,
                     std::span<double> grad_in) {
  for (std::size_t r = 0; r < shape.rows; ++r) {
    for (std::size_t o = 0; o < shape.out_dim; ++o) {
      const double go = grad_out[r * shape.out_dim + o];
      for (std::size_t i = 0; i < shape.in_dim; ++i) {
        grad_weight[o * shape.in_dim + i] += go * in[r * shape.in_dim + i];
      }
      grad_bias[o] += go;
    }
  }
  if (grad_in.empty()) return;
  for (std::size_t r = 0; r < shape.rows; ++r) {
    for (std::size_t i = 0; i < shape.in_dim; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < shape.out_dim; ++o) {
        acc += grad_out[r * shape.out_dim + o] * weight[o * shape.in_dim + i];
      }
      grad_in[r * shape.in_dim + i] = acc;
    }
  }
}

void relu_forward(std::span<const double> pre, std::span<double> out) {
  for (std::size_t k = 0; k < pre.size(); ++k) out[k] = std::max(pre[k], 0.0);
}

void tanh_forward(std::span<const double> pre, std::span<double> out) {
  for (std::size_t k = 0; k < pre.size(); ++k) out[k] = std::tanh(pre[k]);
}

void sigmoid_forward(std::span<const double> pre, std::span<double> out) {
  for (std::size_t k = 0; k < pre.size(); ++k) out[k] = sigmoid(pre[k]);
}

void softmax_forward(std::span<const double> pre, std::size_t cols, std::span<double> out) {
  for (std::size_t start = 0; start + cols <= pre.size(); start += cols) {
    double peak = pre[start];
    for (std::size_t c = 1; c < cols; ++c) peak = std::max(peak, pre[start + c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(pre[start + c] - peak);
    for (std::size_t c = 0; c < cols; ++c) out[start + c] = std::exp(pre[start + c] - peak) / total;
  }
}

double sum(std::span<const double> values) {
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

}  // namespace frtrain::kernels::serial
