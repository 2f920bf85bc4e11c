#include "frtrain/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "frtrain/error.hpp"
#include "frtrain/kernels.hpp"
#include "json.hpp"

namespace frtrain::nnet {

using json = nlohmann::json;

void MLPSpec::validate() const {
  if (input_dim == 0) throw DimensionError("MLPSpec: input_dim must be positive");
  if (output_dim == 0) throw DimensionError("MLPSpec: output_dim must be positive");
}

std::size_t MLPSpec::parameter_count() const {
  if (hidden_dim == 0) return output_dim * input_dim + output_dim;
  return hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim;
}

MLPModel::MLPModel(MLPSpec spec) : spec_(spec) {
  spec_.validate();
  std::size_t offset = 0;
  auto add_layer = [&](std::size_t in, std::size_t out) {
    LayerView view{in, out, offset, offset + in * out};
    offset += in * out + out;
    layers_.push_back(view);
  };
  if (spec_.hidden_dim == 0) {
    add_layer(spec_.input_dim, spec_.output_dim);
  } else {
    add_layer(spec_.input_dim, spec_.hidden_dim);
    add_layer(spec_.hidden_dim, spec_.output_dim);
  }
  params_.assign(offset, 0.0);
}

MLPModel MLPModel::glorot(MLPSpec spec, std::uint64_t seed) {
  MLPModel model(spec);
  std::mt19937_64 rng(seed);
  for (const auto& layer : model.layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in_dim + layer.out_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t k = 0; k < layer.in_dim * layer.out_dim; ++k) {
      model.params_[layer.weight_offset + k] = dist(rng);
    }
  }
  return model;
}

std::span<const double> MLPModel::weight(std::size_t k) const {
  const auto& l = layers_[k];
  return std::span<const double>(params_).subspan(l.weight_offset, l.in_dim * l.out_dim);
}

std::span<const double> MLPModel::bias(std::size_t k) const {
  const auto& l = layers_[k];
  return std::span<const double>(params_).subspan(l.bias_offset, l.out_dim);
}

namespace {

void apply_output(const MLPSpec& spec, const Matrix& logits, Matrix& out) {
  out = Matrix(logits.rows, logits.cols);
  if (spec.output_activation == OutputActivation::sigmoid) {
    kernels::sigmoid_forward(logits.data, out.data);
  } else {
    kernels::softmax_forward(logits.data, logits.cols, out.data);
  }
}

void check_input(const MLPModel& model, const Matrix& batch) {
  if (batch.cols != model.spec().input_dim) {
    throw DimensionError("forward: batch has " + std::to_string(batch.cols) + " columns, model expects " +
                         std::to_string(model.spec().input_dim));
  }
}

Matrix affine(const MLPModel& model, std::size_t k, const Matrix& in) {
  const auto& l = model.layer(k);
  Matrix out(in.rows, l.out_dim);
  kernels::affine_forward({in.rows, l.in_dim, l.out_dim}, in.data, model.weight(k), model.bias(k), out.data);
  return out;
}

}  // namespace

ForwardCache forward_cached(const MLPModel& model, const Matrix& batch) {
  check_input(model, batch);
  ForwardCache cache;
  cache.input = batch;
  if (model.layer_count() == 2) {
    cache.hidden_pre = affine(model, 0, batch);
    cache.hidden = Matrix(cache.hidden_pre.rows, cache.hidden_pre.cols);
    if (model.spec().hidden_activation == HiddenActivation::relu) {
      kernels::relu_forward(cache.hidden_pre.data, cache.hidden.data);
    } else {
      kernels::tanh_forward(cache.hidden_pre.data, cache.hidden.data);
    }
    cache.logits = affine(model, 1, cache.hidden);
  } else {
    cache.logits = affine(model, 0, batch);
  }
  apply_output(model.spec(), cache.logits, cache.output);
  return cache;
}

Matrix forward(const MLPModel& model, const Matrix& batch) { return forward_cached(model, batch).output; }

Gradients backward_from_logits(const MLPModel& model, const ForwardCache& cache, const Matrix& grad_logits,
                               bool want_input_grad) {
  if (grad_logits.rows != cache.logits.rows || grad_logits.cols != cache.logits.cols) {
    throw DimensionError("backward: gradient shape does not match the cached logits");
  }
  Gradients grads;
  grads.parameters.assign(model.parameters().size(), 0.0);
  auto params = std::span<double>(grads.parameters);
  const std::size_t rows = cache.input.rows;

  auto layer_backward = [&](std::size_t k, const Matrix& in, const Matrix& grad_out, Matrix* grad_in) {
    const auto& l = model.layer(k);
    std::span<double> gin;
    if (grad_in != nullptr) {
      *grad_in = Matrix(rows, l.in_dim);
      gin = grad_in->data;
    }
    kernels::affine_backward({rows, l.in_dim, l.out_dim}, in.data, grad_out.data, model.weight(k),
                             params.subspan(l.weight_offset, l.in_dim * l.out_dim),
                             params.subspan(l.bias_offset, l.out_dim), gin);
  };

  if (model.layer_count() == 2) {
    Matrix grad_hidden;
    layer_backward(1, cache.hidden, grad_logits, &grad_hidden);
    const bool relu = model.spec().hidden_activation == HiddenActivation::relu;
    for (std::size_t k = 0; k < grad_hidden.data.size(); ++k) {
      if (relu) {
        if (cache.hidden_pre.data[k] <= 0.0) grad_hidden.data[k] = 0.0;
      } else {
        const double h = cache.hidden.data[k];
        grad_hidden.data[k] *= 1.0 - h * h;
      }
    }
    layer_backward(0, cache.input, grad_hidden, want_input_grad ? &grads.input : nullptr);
  } else {
    layer_backward(0, cache.input, grad_logits, want_input_grad ? &grads.input : nullptr);
  }

  for (double g : grads.parameters) {
    if (!std::isfinite(g)) throw DivergenceError("backward: non-finite parameter gradient");
  }
  return grads;
}

Gradients backward(const MLPModel& model, const ForwardCache& cache, const Matrix& grad_output,
                   bool want_input_grad) {
  if (grad_output.rows != cache.output.rows || grad_output.cols != cache.output.cols) {
    throw DimensionError("backward: gradient shape does not match the cached output");
  }
  Matrix grad_logits(grad_output.rows, grad_output.cols);
  if (model.spec().output_activation == OutputActivation::sigmoid) {
    for (std::size_t k = 0; k < grad_output.data.size(); ++k) {
      const double p = cache.output.data[k];
      grad_logits.data[k] = grad_output.data[k] * p * (1.0 - p);
    }
  } else {
    for (std::size_t r = 0; r < grad_output.rows; ++r) {
      const auto p = cache.output.row(r);
      const auto g = grad_output.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < p.size(); ++c) dot += p[c] * g[c];
      for (std::size_t c = 0; c < p.size(); ++c) grad_logits(r, c) = p[c] * (g[c] - dot);
    }
  }
  return backward_from_logits(model, cache, grad_logits, want_input_grad);
}

double clamp_probability(double p) { return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); }

double weighted_cross_entropy(std::span<const double> probabilities, std::span<const int> labels,
                              std::span<const double> weights) {
  if (probabilities.size() != labels.size() || probabilities.size() != weights.size()) {
    throw DimensionError("weighted_cross_entropy: length mismatch");
  }
  if (probabilities.empty()) return 0.0;
  std::vector<double> terms(probabilities.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double p = clamp_probability(probabilities[i]);
    terms[i] = weights[i] * (labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p));
  }
  return kernels::sum(terms) / static_cast<double>(terms.size());
}

std::vector<double> weighted_cross_entropy_logit_grad(std::span<const double> probabilities,
                                                      std::span<const int> labels,
                                                      std::span<const double> weights) {
  if (probabilities.size() != labels.size() || probabilities.size() != weights.size()) {
    throw DimensionError("weighted_cross_entropy: length mismatch");
  }
  const double inv_m = probabilities.empty() ? 0.0 : 1.0 / static_cast<double>(probabilities.size());
  std::vector<double> grad(probabilities.size(), 0.0);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double p = probabilities[i];
    if (p < kProbabilityFloor || p > 1.0 - kProbabilityFloor) continue;
    grad[i] = weights[i] * inv_m * (p - static_cast<double>(labels[i]));
  }
  return grad;
}

OptimizerState OptimizerState::sgd(double learning_rate) {
  OptimizerState s;
  s.kind = OptimizerKind::sgd;
  s.learning_rate = learning_rate;
  return s;
}

OptimizerState OptimizerState::adam(double learning_rate) {
  OptimizerState s;
  s.kind = OptimizerKind::adam;
  s.learning_rate = learning_rate;
  return s;
}

namespace {

void check_step(const MLPModel& model, std::span<const double> gradient, const OptimizerState& state) {
  if (gradient.size() != model.parameters().size()) throw DimensionError("optimizer: gradient size mismatch");
  if (!(state.learning_rate > 0.0)) throw ConfigError("optimizer: learning rate must be positive");
  for (double g : gradient) {
    if (!std::isfinite(g)) throw DivergenceError("optimizer: non-finite gradient");
  }
}

}  // namespace

void sgd_step(MLPModel& model, std::span<const double> gradient, OptimizerState& state) {
  check_step(model, gradient, state);
  auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) params[k] -= state.learning_rate * gradient[k];
  ++state.step;
}

void adam_step(MLPModel& model, std::span<const double> gradient, OptimizerState& state) {
  check_step(model, gradient, state);
  auto params = model.parameters();
  if (state.first_moment.size() != params.size()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = gradient[k];
    state.first_moment[k] = state.beta1 * state.first_moment[k] + (1.0 - state.beta1) * g;
    state.second_moment[k] = state.beta2 * state.second_moment[k] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.first_moment[k] / correction1;
    const double v_hat = state.second_moment[k] / correction2;
    params[k] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

void optimizer_step(MLPModel& model, std::span<const double> gradient, OptimizerState& state) {
  if (state.kind == OptimizerKind::adam) {
    adam_step(model, gradient, state);
  } else {
    sgd_step(model, gradient, state);
  }
}

std::string model_to_json(const MLPModel& model) {
  const auto& s = model.spec();
  json j;
  j["spec"] = {{"input_dim", s.input_dim},
               {"hidden_dim", s.hidden_dim},
               {"output_dim", s.output_dim},
               {"hidden_activation", s.hidden_activation == HiddenActivation::relu ? "relu" : "tanh"},
               {"output_activation", s.output_activation == OutputActivation::sigmoid ? "sigmoid" : "softmax"}};
  j["parameters"] = std::vector<double>(model.parameters().begin(), model.parameters().end());
  return j.dump(2);
}

MLPModel model_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const auto& js = j.at("spec");
    MLPSpec spec;
    spec.input_dim = js.at("input_dim").get<std::size_t>();
    spec.hidden_dim = js.at("hidden_dim").get<std::size_t>();
    spec.output_dim = js.at("output_dim").get<std::size_t>();
    const auto hidden = js.value("hidden_activation", std::string("relu"));
    if (hidden != "relu" && hidden != "tanh") throw ParseError("model: unknown hidden_activation '" + hidden + "'");
    spec.hidden_activation = hidden == "relu" ? HiddenActivation::relu : HiddenActivation::tanh;
    const auto output = js.value("output_activation", std::string("sigmoid"));
    if (output != "sigmoid" && output != "softmax") {
      throw ParseError("model: unknown output_activation '" + output + "'");
    }
    spec.output_activation = output == "sigmoid" ? OutputActivation::sigmoid : OutputActivation::softmax;
    MLPModel model(spec);
    const auto params = j.at("parameters").get<std::vector<double>>();
    if (params.size() != model.parameters().size()) {
      throw ParseError("model: expected " + std::to_string(model.parameters().size()) + " parameters, got " +
                       std::to_string(params.size()));
    }
    std::copy(params.begin(), params.end(), model.parameters().begin());
    return model;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

void save_model(const MLPModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file " + path);
  out << model_to_json(model) << '\n';
}

MLPModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read model file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace frtrain::nnet
