#pragma once

// Micro network core: 0- or 1-hidden-layer perceptrons with exact
// reverse-mode gradients, weighted losses and SGD/Adam updates. Used for the
// classifier and both adversaries.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "frtrain/matrix.hpp"

namespace frtrain::nnet {

enum class HiddenActivation { relu, tanh };
enum class OutputActivation { sigmoid, softmax };

struct MLPSpec {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 0;  // 0 = linear model
  std::size_t output_dim = 1;
  HiddenActivation hidden_activation = HiddenActivation::relu;
  OutputActivation output_activation = OutputActivation::sigmoid;

  void validate() const;
  std::size_t parameter_count() const;
  bool operator==(const MLPSpec&) const = default;
};

class MLPModel {
 public:
  struct LayerView {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::size_t weight_offset = 0;  // out_dim x in_dim, row-major
    std::size_t bias_offset = 0;
  };

  MLPModel() = default;
  // All parameters zero.
  explicit MLPModel(MLPSpec spec);
  // Weights uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)); biases zero.
  static MLPModel glorot(MLPSpec spec, std::uint64_t seed);

  const MLPSpec& spec() const { return spec_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }
  std::size_t layer_count() const { return layers_.size(); }
  const LayerView& layer(std::size_t k) const { return layers_[k]; }

  std::span<const double> weight(std::size_t k) const;
  std::span<const double> bias(std::size_t k) const;

  bool operator==(const MLPModel& other) const { return spec_ == other.spec_ && params_ == other.params_; }

 private:
  MLPSpec spec_;
  std::vector<LayerView> layers_;
  std::vector<double> params_;
};

struct ForwardCache {
  Matrix input;
  Matrix hidden_pre;  // empty for linear models
  Matrix hidden;
  Matrix logits;
  Matrix output;
};

Matrix forward(const MLPModel& model, const Matrix& batch);
ForwardCache forward_cached(const MLPModel& model, const Matrix& batch);

struct Gradients {
  std::vector<double> parameters;  // same layout as MLPModel::parameters()
  Matrix input;                    // d/d input, filled only on request
};

// `grad_logits` is the loss gradient with respect to the pre-activation output.
Gradients backward_from_logits(const MLPModel& model, const ForwardCache& cache, const Matrix& grad_logits,
                               bool want_input_grad = false);
// `grad_output` is the loss gradient with respect to the activated output.
Gradients backward(const MLPModel& model, const ForwardCache& cache, const Matrix& grad_output,
                   bool want_input_grad = false);

// --- losses ---------------------------------------------------------------

inline constexpr double kProbabilityFloor = 1e-7;
double clamp_probability(double p);

// (1/m) sum_i w_i * [-y_i log p_i - (1 - y_i) log(1 - p_i)], p clamped to
// [kProbabilityFloor, 1 - kProbabilityFloor]. m is the batch size.
double weighted_cross_entropy(std::span<const double> probabilities, std::span<const int> labels,
                              std::span<const double> weights);
// Gradient of weighted_cross_entropy w.r.t. the sigmoid logits producing the
// probabilities. Zero where the clamp is active.
std::vector<double> weighted_cross_entropy_logit_grad(std::span<const double> probabilities,
                                                      std::span<const int> labels,
                                                      std::span<const double> weights);

// --- optimizers -----------------------------------------------------------

enum class OptimizerKind { sgd, adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;

  static OptimizerState sgd(double learning_rate);
  static OptimizerState adam(double learning_rate);
};

// Descent steps: parameters move against `gradient`.
void sgd_step(MLPModel& model, std::span<const double> gradient, OptimizerState& state);
void adam_step(MLPModel& model, std::span<const double> gradient, OptimizerState& state);
void optimizer_step(MLPModel& model, std::span<const double> gradient, OptimizerState& state);

// --- persistence ----------------------------------------------------------

std::string model_to_json(const MLPModel& model);
MLPModel model_from_json(const std::string& text);
void save_model(const MLPModel& model, const std::string& path);
MLPModel load_model(const std::string& path);

}  // namespace frtrain::nnet
