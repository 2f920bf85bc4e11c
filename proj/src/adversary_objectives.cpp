#include <algorithm>
#include <cmath>
#include <numbers>

#include "frtrain/adversaries.hpp"
#include "frtrain/error.hpp"
#include "frtrain/kernels.hpp"
#include "frtrain/metrics.hpp"

namespace frtrain::adversaries {

namespace {

// log(1 + e^t) without overflow.
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

Matrix column(std::span<const double> values) {
  Matrix m(values.size(), 1);
  std::copy(values.begin(), values.end(), m.data.begin());
  return m;
}

// Contribution of one softmax head over the examples listed in `rows`:
// sum_{i in rows} scale * w_i * log D_{z_i}(yhat_i). Accumulates the value and
// gradients into `out` (head gradient appended, prediction gradient added).
double softmax_head_term(const FairnessAdversary& head, std::span<const double> predictions, std::span<const int> z,
                         std::span<const double> weights, const std::vector<std::size_t>& rows, double scale,
                         bool with_gradients, ObjectiveResult& out) {
  const std::size_t n_classes = head.model.spec().output_dim;
  std::vector<double> selected(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) selected[k] = predictions[rows[k]];
  const auto cache = nnet::forward_cached(head.model, column(selected));

  std::vector<double> terms(rows.size());
  Matrix grad_logits(rows.size(), n_classes);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    const auto logits = cache.logits.row(k);
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double l : logits) total += std::exp(l - peak);
    const double log_d = logits[static_cast<std::size_t>(z[i])] - peak - std::log(total);
    const double coef = scale * weights[i];
    terms[k] = coef * log_d;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double indicator = static_cast<int>(c) == z[i] ? 1.0 : 0.0;
      grad_logits(k, c) = coef * (indicator - cache.output(k, c));
    }
  }
  if (with_gradients) {
    auto grads = nnet::backward_from_logits(head.model, cache, grad_logits, true);
    out.adversary_grads.push_back(std::move(grads.parameters));
    for (std::size_t k = 0; k < rows.size(); ++k) out.prediction_grad[rows[k]] += grads.input(k, 0);
  }
  return kernels::sum(terms);
}

void check_fairness_inputs(const FairnessAdversary& head, std::size_t n, std::span<const int> z,
                           std::span<const double> weights) {
  if (head.model.spec().input_dim != 1) throw DimensionError("fairness adversary must take one input");
  if (z.size() != n || weights.size() != n) throw DimensionError("fairness objective: length mismatch");
  const auto n_classes = static_cast<int>(head.model.spec().output_dim);
  for (int code : z) {
    if (code < 0 || code >= n_classes) {
      throw DimensionError("fairness objective: sensitive code outside the adversary's output range");
    }
  }
}

double conditional_entropy(std::span<const int> z, std::span<const int> labels) {
  double h = 0.0;
  const double n = static_cast<double>(z.size());
  for (int y : {0, 1}) {
    std::vector<int> codes;
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (labels[i] == y) codes.push_back(z[i]);
    }
    if (!codes.empty()) h += static_cast<double>(codes.size()) / n * metrics::empirical_entropy(codes);
  }
  return h;
}

}  // namespace

FairnessAdversary make_fairness_adversary(int z_cardinality, std::uint64_t seed, std::size_t hidden_dim) {
  nnet::MLPSpec spec;
  spec.input_dim = 1;
  spec.hidden_dim = hidden_dim;
  spec.output_dim = static_cast<std::size_t>(z_cardinality);
  spec.output_activation = nnet::OutputActivation::softmax;
  return {nnet::MLPModel::glorot(spec, seed)};
}

RobustnessAdversary make_robustness_adversary(std::size_t feature_dim, int z_cardinality, std::size_t hidden_dim,
                                              std::uint64_t seed) {
  nnet::MLPSpec spec;
  spec.input_dim = feature_dim + static_cast<std::size_t>(z_cardinality) + 1;
  spec.hidden_dim = hidden_dim;
  spec.output_dim = 1;
  spec.output_activation = nnet::OutputActivation::sigmoid;
  return {nnet::MLPModel::glorot(spec, seed), z_cardinality};
}

Matrix robustness_inputs(const Matrix& features, std::span<const int> z, std::span<const double> label_values,
                         int z_cardinality) {
  if (z.size() != features.rows || label_values.size() != features.rows) {
    throw DimensionError("robustness_inputs: length mismatch");
  }
  const std::size_t zc = static_cast<std::size_t>(z_cardinality);
  Matrix in(features.rows, features.cols + zc + 1);
  for (std::size_t r = 0; r < features.rows; ++r) {
    auto dst = in.row(r);
    const auto src = features.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    if (z[r] < 0 || z[r] >= z_cardinality) throw DimensionError("robustness_inputs: sensitive code out of range");
    dst[features.cols + static_cast<std::size_t>(z[r])] = 1.0;
    dst[features.cols + zc] = label_values[r];
  }
  return in;
}

ObjectiveResult fairness_objective_di(const FairnessAdversary& adversary, std::span<const double> predictions,
                                      std::span<const int> z, std::span<const double> weights, bool with_gradients) {
  check_fairness_inputs(adversary, predictions.size(), z, weights);
  ObjectiveResult out;
  if (predictions.empty()) return out;
  out.prediction_grad.assign(predictions.size(), 0.0);
  std::vector<std::size_t> rows(predictions.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const double scale = 1.0 / static_cast<double>(predictions.size());
  out.value = softmax_head_term(adversary, predictions, z, weights, rows, scale, with_gradients, out) +
              metrics::empirical_entropy(z);
  return out;
}

ObjectiveResult fairness_objective_eo(std::span<const FairnessAdversary> heads, std::span<const double> predictions,
                                      std::span<const int> z, std::span<const int> labels,
                                      std::span<const double> weights, bool with_gradients) {
  if (heads.size() != 2) throw DimensionError("fairness_objective_eo: expected one adversary per label value");
  for (const auto& h : heads) check_fairness_inputs(h, predictions.size(), z, weights);
  if (labels.size() != predictions.size()) throw DimensionError("fairness_objective_eo: length mismatch");
  ObjectiveResult out;
  if (predictions.empty()) return out;
  out.prediction_grad.assign(predictions.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(predictions.size());
  double value = 0.0;
  for (int y : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == y) rows.push_back(i);
    }
    if (rows.empty()) {
      if (with_gradients) out.adversary_grads.emplace_back(heads[y].model.parameters().size(), 0.0);
      continue;
    }
    value += softmax_head_term(heads[static_cast<std::size_t>(y)], predictions, z, weights, rows, scale,
                               with_gradients, out);
  }
  out.value = value + conditional_entropy(z, labels);
  return out;
}

ObjectiveResult fairness_objective_eopp(const FairnessAdversary& adversary, std::span<const double> predictions,
                                        std::span<const int> z, std::span<const int> labels,
                                        std::span<const double> weights, bool with_gradients) {
  check_fairness_inputs(adversary, predictions.size(), z, weights);
  if (labels.size() != predictions.size()) throw DimensionError("fairness_objective_eopp: length mismatch");
  ObjectiveResult out;
  out.prediction_grad.assign(predictions.size(), 0.0);
  std::vector<std::size_t> rows;
  std::vector<int> positive_z;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      rows.push_back(i);
      positive_z.push_back(z[i]);
    }
  }
  if (rows.empty()) {
    if (with_gradients) out.adversary_grads.emplace_back(adversary.model.parameters().size(), 0.0);
    return out;
  }
  const double scale = 1.0 / static_cast<double>(rows.size());
  out.value = softmax_head_term(adversary, predictions, z, weights, rows, scale, with_gradients, out) +
              metrics::empirical_entropy(positive_z);
  return out;
}

RobustnessResult robustness_objective(const RobustnessAdversary& adversary, const Matrix& train_features,
                                      std::span<const int> train_z, std::span<const double> train_predictions,
                                      const Matrix& val_features, std::span<const int> val_z,
                                      std::span<const int> val_labels, bool with_gradients) {
  if (train_features.rows == 0 || val_features.rows == 0) {
    throw ConfigError("robustness objective needs nonempty training and validation sets");
  }
  std::vector<double> val_values(val_labels.begin(), val_labels.end());
  const auto train_in = robustness_inputs(train_features, train_z, train_predictions, adversary.z_cardinality);
  const auto val_in = robustness_inputs(val_features, val_z, val_values, adversary.z_cardinality);
  const auto train_cache = nnet::forward_cached(adversary.model, train_in);
  const auto val_cache = nnet::forward_cached(adversary.model, val_in);

  const double m_train = static_cast<double>(train_in.rows);
  const double m_val = static_cast<double>(val_in.rows);
  // Each side carries mass 1/2, so H(V) = ln 2.
  const double train_scale = 0.5 / m_train;
  const double val_scale = 0.5 / m_val;

  RobustnessResult out;
  std::vector<double> val_terms(val_in.rows);
  Matrix val_grad(val_in.rows, 1);
  for (std::size_t k = 0; k < val_in.rows; ++k) {
    const double logit = val_cache.logits(k, 0);
    val_terms[k] = -val_scale * softplus(-logit);  // scale * log D
    val_grad(k, 0) = val_scale * (1.0 - val_cache.output(k, 0));
  }
  std::vector<double> train_terms(train_in.rows);
  Matrix train_grad(train_in.rows, 1);
  out.train_decisions.resize(train_in.rows);
  for (std::size_t k = 0; k < train_in.rows; ++k) {
    const double logit = train_cache.logits(k, 0);
    train_terms[k] = -train_scale * softplus(logit);  // scale * log(1 - D)
    train_grad(k, 0) = -train_scale * train_cache.output(k, 0);
    out.train_decisions[k] = train_cache.output(k, 0);
  }
  const double objective = kernels::sum(val_terms) + kernels::sum(train_terms);
  out.value = objective + std::numbers::ln2;
  out.adversary_loss = -objective;

  if (with_gradients) {
    auto gv = nnet::backward_from_logits(adversary.model, val_cache, val_grad, false);
    auto gt = nnet::backward_from_logits(adversary.model, train_cache, train_grad, true);
    for (std::size_t k = 0; k < gv.parameters.size(); ++k) gv.parameters[k] += gt.parameters[k];
    out.adversary_grads.push_back(std::move(gv.parameters));
    const std::size_t label_col = train_in.cols - 1;
    out.prediction_grad.resize(train_in.rows);
    for (std::size_t k = 0; k < train_in.rows; ++k) out.prediction_grad[k] = gt.input(k, label_col);
  }
  return out;
}

}  // namespace frtrain::adversaries
