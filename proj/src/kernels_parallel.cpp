#include "frtrain/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace frtrain::kernels {

namespace {

std::size_t chunk_count(std::size_t rows) { return (rows + kReductionChunk - 1) / kReductionChunk; }

}  // namespace

void affine_forward(const AffineShape& shape, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out) {
  const auto rows = static_cast<long>(shape.rows);
  const std::size_t n_in = shape.in_dim;
  const std::size_t n_out = shape.out_dim;
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const double* x = in.data() + static_cast<std::size_t>(r) * n_in;
    double* y = out.data() + static_cast<std::size_t>(r) * n_out;
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* w = weight.data() + o * n_in;
      double acc = bias[o];
      for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * x[i];
      y[o] = acc;
    }
  }
}

void affine_backward(const AffineShape& shape, std::span<const double> in, std::span<const double> grad_out,
                     std::span<const double> weight, std::span<double> grad_weight, std::span<double> grad_bias,
                     std::span<double> grad_in) {
  const std::size_t n_in = shape.in_dim;
  const std::size_t n_out = shape.out_dim;
  const std::size_t n_w = n_in * n_out;
  const std::size_t width = n_w + n_out;
  const auto chunks = static_cast<long>(chunk_count(shape.rows));

  // One partial (weight grads followed by bias grads) per row chunk.
  std::vector<double> partial(static_cast<std::size_t>(chunks) * width, 0.0);

#pragma omp parallel for schedule(static)
  for (long c = 0; c < chunks; ++c) {
    double* acc = partial.data() + static_cast<std::size_t>(c) * width;
    const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
    const std::size_t end = std::min(shape.rows, begin + kReductionChunk);
    for (std::size_t r = begin; r < end; ++r) {
      const double* x = in.data() + r * n_in;
      const double* g = grad_out.data() + r * n_out;
      for (std::size_t o = 0; o < n_out; ++o) {
        const double go = g[o];
        if (go == 0.0) continue;
        double* gw = acc + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) gw[i] += go * x[i];
        acc[n_w + o] += go;
      }
    }
  }
  for (long c = 0; c < chunks; ++c) {
    const double* acc = partial.data() + static_cast<std::size_t>(c) * width;
    for (std::size_t k = 0; k < n_w; ++k) grad_weight[k] += acc[k];
    for (std::size_t o = 0; o < n_out; ++o) grad_bias[o] += acc[n_w + o];
  }

  if (grad_in.empty()) return;
  const auto rows = static_cast<long>(shape.rows);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const double* g = grad_out.data() + static_cast<std::size_t>(r) * n_out;
    double* gx = grad_in.data() + static_cast<std::size_t>(r) * n_in;
    std::fill(gx, gx + n_in, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* w = weight.data() + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) gx[i] += g[o] * w[i];
    }
  }
}

void relu_forward(std::span<const double> pre, std::span<double> out) {
  const auto n = static_cast<long>(pre.size());
#pragma omp parallel for schedule(static)
  for (long k = 0; k < n; ++k) out[k] = pre[k] > 0.0 ? pre[k] : 0.0;
}

void tanh_forward(std::span<const double> pre, std::span<double> out) {
  const auto n = static_cast<long>(pre.size());
#pragma omp parallel for schedule(static)
  for (long k = 0; k < n; ++k) out[k] = std::tanh(pre[k]);
}

void sigmoid_forward(std::span<const double> pre, std::span<double> out) {
  const auto n = static_cast<long>(pre.size());
#pragma omp parallel for schedule(static)
  for (long k = 0; k < n; ++k) out[k] = sigmoid(pre[k]);
}

void softmax_forward(std::span<const double> pre, std::size_t cols, std::span<double> out) {
  const auto rows = static_cast<long>(pre.size() / cols);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const double* p = pre.data() + static_cast<std::size_t>(r) * cols;
    double* q = out.data() + static_cast<std::size_t>(r) * cols;
    const double peak = *std::max_element(p, p + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      q[c] = std::exp(p[c] - peak);
      total += q[c];
    }
    for (std::size_t c = 0; c < cols; ++c) q[c] /= total;
  }
}

double sum(std::span<const double> values) {
  const auto chunks = static_cast<long>(chunk_count(values.size()));
  std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < chunks; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
    const std::size_t end = std::min(values.size(), begin + kReductionChunk);
    double acc = 0.0;
    for (std::size_t k = begin; k < end; ++k) acc += values[k];
    partial[static_cast<std::size_t>(c)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace frtrain::kernels
