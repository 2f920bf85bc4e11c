#include "frtrain/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "frtrain/adversaries.hpp"
#include "frtrain/error.hpp"
#include "frtrain/kernels.hpp"
#include "frtrain/seed.hpp"

namespace frtrain::trainer {

namespace {

// x followed by indicators of z = 1 .. |Z|-1.
Matrix append_sensitive(const Matrix& x, std::span<const int> z, int z_cardinality) {
  const std::size_t extra = static_cast<std::size_t>(z_cardinality - 1);
  Matrix out(x.rows, x.cols + extra);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto src = x.row(r);
    auto dst = out.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    if (z[r] > 0) dst[x.cols + static_cast<std::size_t>(z[r] - 1)] = 1.0;
  }
  return out;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Batch {
  Matrix x;   // raw features
  Matrix gx;  // generator inputs
  std::vector<int> z;
  std::vector<int> y;
  std::vector<double> w;
};

Batch make_batch(const Dataset& d, const std::vector<std::size_t>& rows, bool with_z) {
  Batch b;
  b.x = Matrix(rows.size(), d.feature_dim());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& e = d[rows[k]];
    std::copy(e.features.begin(), e.features.end(), b.x.row(k).begin());
    b.z.push_back(e.sensitive);
    b.y.push_back(e.label);
    b.w.push_back(e.weight);
  }
  b.gx = with_z ? append_sensitive(b.x, b.z, d.z_cardinality()) : b.x;
  return b;
}

Batch full_batch(const Dataset& d, bool with_z) {
  std::vector<std::size_t> rows(d.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return make_batch(d, rows, with_z);
}

std::vector<double> column0(const Matrix& m) {
  std::vector<double> out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) out[r] = m(r, 0);
  return out;
}

void check_finite(double v, const char* what, std::size_t epoch) {
  if (!std::isfinite(v)) {
    throw DivergenceError(std::string("non-finite ") + what + " at epoch " + std::to_string(epoch));
  }
}

// Batches for one epoch; a single full batch unless minibatching.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, const TrainConfig& cfg, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (cfg.batch_mode == BatchMode::full || cfg.batch_size >= n) return {order};
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += cfg.batch_size) {
    out.emplace_back(order.begin() + static_cast<long>(start),
                     order.begin() + static_cast<long>(std::min(n, start + cfg.batch_size)));
  }
  return out;
}

double probe_accuracy(std::span<const double> p, std::span<const int> y) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) correct += decide(p[i]) == y[i] ? 1 : 0;
  return p.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(p.size());
}

double probe_di(std::span<const double> p, std::span<const int> z, int z_card) {
  const auto decisions = decide(p);
  try {
    return metrics::disparate_impact(decisions, z, z_card);
  } catch (const Error&) {
    return kNaN;
  }
}

void ascend(nnet::MLPModel& model, const std::vector<double>& objective_grad, nnet::OptimizerState& opt) {
  std::vector<double> descent(objective_grad.size());
  for (std::size_t k = 0; k < descent.size(); ++k) descent[k] = -objective_grad[k];
  nnet::optimizer_step(model, descent, opt);
}

}  // namespace

void TrainConfig::validate() const {
  if (lambda1 < 0.0 || lambda1 >= 1.0) throw ConfigError("lambda1 must be in [0, 1)");
  if (lambda2 < 0.0 || lambda2 >= 1.0) throw ConfigError("lambda2 must be in [0, 1)");
  if (lambda1 + lambda2 >= 1.0) throw ConfigError("lambda1 + lambda2 must be below 1");
  if (!(generator_lr > 0.0) || !(disc_lr > 0.0) || !(robust_disc_lr > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (pretrain_epochs > epochs) throw ConfigError("pretrain_epochs exceeds epochs");
  if (update_ratio < 1) throw ConfigError("update_ratio must be at least 1");
  if (batch_mode == BatchMode::minibatch && batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!std::isfinite(reweight_threshold)) throw ConfigError("reweight threshold must be finite");
}

std::string to_string(FairnessCriterion c) {
  switch (c) {
    case FairnessCriterion::di:
      return "DI";
    case FairnessCriterion::eo:
      return "EO";
    case FairnessCriterion::eopp:
      return "EOPP";
  }
  return "DI";
}

FairnessCriterion criterion_from_string(const std::string& s) {
  if (s == "DI" || s == "di") return FairnessCriterion::di;
  if (s == "EO" || s == "eo") return FairnessCriterion::eo;
  if (s == "EOPP" || s == "eopp") return FairnessCriterion::eopp;
  throw ConfigError("unknown fairness criterion '" + s + "'");
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return {
      {"lambda1", c.lambda1},
      {"lambda2", c.lambda2},
      {"C", c.reweight_threshold},
      {"fairness_criterion", to_string(c.fairness_criterion)},
      {"generator_lr", c.generator_lr},
      {"disc_lr", c.disc_lr},
      {"robust_disc_lr", c.robust_disc_lr},
      {"epochs", c.epochs},
      {"pretrain_epochs", c.pretrain_epochs},
      {"freeze_until_accuracy", c.freeze_until_accuracy},
      {"freeze_max_fraction", c.freeze_max_fraction},
      {"update_ratio", c.update_ratio},
      {"reweight", c.reweight},
      {"seed", c.seed},
      {"batch_mode", c.batch_mode == BatchMode::full ? "full" : "minibatch"},
      {"batch_size", c.batch_size},
      {"generator_sees_z", c.generator_sees_z},
      {"generator_hidden", c.generator_hidden},
      {"fairness_hidden", c.fairness_hidden},
      {"robust_hidden", c.robust_hidden},
      {"hidden_activation", c.hidden_activation == nnet::HiddenActivation::relu ? "relu" : "tanh"},
  };
}

TrainConfig config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "lambda1") c.lambda1 = v.get<double>();
      else if (key == "lambda2") c.lambda2 = v.get<double>();
      else if (key == "C") c.reweight_threshold = v.get<double>();
      else if (key == "fairness_criterion") c.fairness_criterion = criterion_from_string(v.get<std::string>());
      else if (key == "generator_lr") c.generator_lr = v.get<double>();
      else if (key == "disc_lr") c.disc_lr = v.get<double>();
      else if (key == "robust_disc_lr") c.robust_disc_lr = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "pretrain_epochs") c.pretrain_epochs = v.get<std::size_t>();
      else if (key == "freeze_until_accuracy") c.freeze_until_accuracy = v.get<double>();
      else if (key == "freeze_max_fraction") c.freeze_max_fraction = v.get<double>();
      else if (key == "update_ratio") c.update_ratio = v.get<std::size_t>();
      else if (key == "reweight") c.reweight = v.get<bool>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "batch_mode") {
        const auto mode = v.get<std::string>();
        if (mode != "full" && mode != "minibatch") throw ConfigError("unknown batch_mode '" + mode + "'");
        c.batch_mode = mode == "full" ? BatchMode::full : BatchMode::minibatch;
      } else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "generator_sees_z") c.generator_sees_z = v.get<bool>();
      else if (key == "generator_hidden") c.generator_hidden = v.get<std::size_t>();
      else if (key == "fairness_hidden") c.fairness_hidden = v.get<std::size_t>();
      else if (key == "robust_hidden") c.robust_hidden = v.get<std::size_t>();
      else if (key == "hidden_activation") {
        const auto act = v.get<std::string>();
        if (act != "relu" && act != "tanh") throw ConfigError("unknown hidden_activation '" + act + "'");
        c.hidden_activation = act == "relu" ? nnet::HiddenActivation::relu : nnet::HiddenActivation::tanh;
      } else {
        throw ConfigError("unknown train config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  try {
    return config_from_json(nlohmann::json::parse(in), base);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "epoch,l1,l2,l3,lc,ld,r,weight_min,weight_max,probe_accuracy,probe_di,fairness_frozen\n";
  char buf[512];
  for (const auto& e : history.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n", e.epoch,
                  e.l1, e.l2, e.l3, e.lc, e.ld, e.r, e.weight_min, e.weight_max, e.probe_accuracy, e.probe_di,
                  e.fairness_frozen ? 1 : 0);
    out << buf;
  }
}

std::vector<double> compute_example_weights(std::span<const double> decisions, double classifier_loss,
                                            double discriminator_loss, double threshold, double* gate_out) {
  if (!(discriminator_loss > 0.0)) {
    std::fprintf(stderr, "frtrain: discriminator loss %g <= 0, example re-weighting suspended\n",
                 discriminator_loss);
    if (gate_out != nullptr) *gate_out = 1.0;
    return std::vector<double>(decisions.size(), 1.0);
  }
  const double gate = kernels::sigmoid(classifier_loss / discriminator_loss - threshold);
  if (gate_out != nullptr) *gate_out = gate;
  std::vector<double> w(decisions.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = gate + decisions[i] * (1.0 - gate);
  return w;
}

nnet::MLPSpec generator_spec(std::size_t feature_dim, int z_cardinality, const TrainConfig& cfg) {
  nnet::MLPSpec spec;
  spec.input_dim = feature_dim + (cfg.generator_sees_z ? static_cast<std::size_t>(z_cardinality - 1) : 0);
  spec.hidden_dim = cfg.generator_hidden;
  spec.output_dim = 1;
  spec.hidden_activation = cfg.hidden_activation;
  spec.output_activation = nnet::OutputActivation::sigmoid;
  return spec;
}

Matrix generator_inputs(const nnet::MLPModel& model, const Dataset& data) {
  const std::size_t in = model.spec().input_dim;
  if (in == data.feature_dim()) return data.features();
  if (in == data.feature_dim() + static_cast<std::size_t>(data.z_cardinality() - 1)) {
    return append_sensitive(data.features(), data.sensitive(), data.z_cardinality());
  }
  throw DimensionError("model input width " + std::to_string(in) + " does not fit a dataset with " +
                       std::to_string(data.feature_dim()) + " features");
}

std::vector<double> predict(const nnet::MLPModel& model, const Matrix& inputs) {
  return column0(nnet::forward(model, inputs));
}

std::vector<double> predict(const nnet::MLPModel& model, const Dataset& data) {
  return predict(model, generator_inputs(model, data));
}

std::vector<int> decide(std::span<const double> probabilities) {
  std::vector<int> out(probabilities.size());
  std::transform(probabilities.begin(), probabilities.end(), out.begin(), [](double p) { return decide(p); });
  return out;
}

metrics::MetricsReport evaluate(const nnet::MLPModel& model, const Dataset& data) {
  const auto decisions = decide(predict(model, data));
  return metrics::make_report(decisions, data.labels(), data.sensitive(), data.z_cardinality());
}

TrainResult train_frtrain(const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  const bool robust = cfg.lambda2 > 0.0;
  const bool fair = cfg.lambda1 > 0.0;
  if (robust && val.empty()) throw ConfigError("lambda2 > 0 requires a nonempty validation set");
  if (robust && val.feature_dim() != train.feature_dim()) {
    throw DimensionError("validation and training feature dimensions differ");
  }
  const int z_card = train.z_cardinality();

  auto generator = nnet::MLPModel::glorot(generator_spec(train.feature_dim(), train.z_cardinality(), cfg), derive_seed(cfg.seed, 0));
  auto gen_opt = nnet::OptimizerState::adam(cfg.generator_lr);

  const std::size_t n_heads = cfg.fairness_criterion == FairnessCriterion::eo ? 2 : 1;
  std::vector<adversaries::FairnessAdversary> heads;
  std::vector<nnet::OptimizerState> head_opts;
  for (std::size_t h = 0; h < n_heads; ++h) {
    heads.push_back(adversaries::make_fairness_adversary(z_card, derive_seed(cfg.seed, 1 + h), cfg.fairness_hidden));
    head_opts.push_back(nnet::OptimizerState::sgd(cfg.disc_lr));
  }
  auto robust_adv = adversaries::make_robustness_adversary(train.feature_dim(), z_card, cfg.robust_hidden,
                                                           derive_seed(cfg.seed, 8));
  auto robust_opt = nnet::OptimizerState::sgd(cfg.robust_disc_lr);

  const Batch val_batch = robust ? full_batch(val, false) : Batch{};
  const Batch all = full_batch(train, cfg.generator_sees_z);
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 9));
  const double l1_scale = 1.0 - cfg.lambda1 - cfg.lambda2;
  const auto release_epoch = static_cast<std::size_t>(std::ceil(cfg.freeze_max_fraction * static_cast<double>(cfg.epochs)));

  auto fairness_value = [&](const Batch& b, std::span<const double> p, std::span<const double> w, bool grads) {
    switch (cfg.fairness_criterion) {
      case FairnessCriterion::di:
        return adversaries::fairness_objective_di(heads[0], p, b.z, w, grads);
      case FairnessCriterion::eo:
        return adversaries::fairness_objective_eo(heads, p, b.z, b.y, w, grads);
      case FairnessCriterion::eopp:
        return adversaries::fairness_objective_eopp(heads[0], p, b.z, b.y, w, grads);
    }
    throw ConfigError("unknown fairness criterion");
  };

  TrainResult result;
  result.history.epochs.reserve(cfg.epochs);
  bool fairness_frozen = true;
  double last_probe_accuracy = 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool pretraining = epoch < cfg.pretrain_epochs;
    if (!pretraining && fairness_frozen &&
        (last_probe_accuracy >= cfg.freeze_until_accuracy || epoch >= release_epoch)) {
      fairness_frozen = false;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.l2 = kNaN;
    rec.l3 = kNaN;
    rec.ld = kNaN;
    rec.fairness_frozen = fairness_frozen;
    rec.weight_min = std::numeric_limits<double>::infinity();
    rec.weight_max = -std::numeric_limits<double>::infinity();

    const auto batches = epoch_batches(train.size(), cfg, shuffle_rng);
    for (const auto& rows : batches) {
      const Batch local = batches.size() == 1 ? Batch{} : make_batch(train, rows, cfg.generator_sees_z);
      const Batch& b = batches.size() == 1 ? all : local;

      if (!pretraining) {
        // Adversary ascent against the current (fixed) generator.
        const auto p_fixed = predict(generator, b.gx);
        for (std::size_t k = 0; k < cfg.update_ratio; ++k) {
          std::vector<double> w = b.w;
          if (robust) {
            const auto r = adversaries::robustness_objective(robust_adv, b.x, b.z, p_fixed, val_batch.x, val_batch.z,
                                                             val_batch.y, true);
            check_finite(r.value, "robustness objective", epoch);
            if (fair && !fairness_frozen && cfg.reweight) {
              const double lc = nnet::weighted_cross_entropy(p_fixed, b.y, b.w);
              const auto rw = compute_example_weights(r.train_decisions, lc, r.adversary_loss, cfg.reweight_threshold);
              for (std::size_t i = 0; i < w.size(); ++i) w[i] *= rw[i];
            }
            ascend(robust_adv.model, r.adversary_grads[0], robust_opt);
          }
          if (fair && !fairness_frozen) {
            const auto f = fairness_value(b, p_fixed, w, true);
            check_finite(f.value, "fairness objective", epoch);
            for (std::size_t h = 0; h < heads.size(); ++h) ascend(heads[h].model, f.adversary_grads[h], head_opts[h]);
          }
        }
      }

      // Generator descent with the adversaries held fixed.
      const auto cache = nnet::forward_cached(generator, b.gx);
      const auto p = column0(cache.output);
      rec.lc = nnet::weighted_cross_entropy(p, b.y, b.w);
      check_finite(rec.lc, "classifier loss", epoch);

      std::vector<double> w = b.w;
      std::vector<double> pred_grad(p.size(), 0.0);  // d objective / d p from the adversary terms
      rec.r = 1.0;
      if (!pretraining && robust) {
        const auto r = adversaries::robustness_objective(robust_adv, b.x, b.z, p, val_batch.x, val_batch.z,
                                                         val_batch.y, true);
        check_finite(r.value, "robustness objective", epoch);
        rec.l3 = r.value;
        rec.ld = r.adversary_loss;
        for (std::size_t i = 0; i < p.size(); ++i) pred_grad[i] += cfg.lambda2 * r.prediction_grad[i];
        if (cfg.reweight) {
          const auto rw = compute_example_weights(r.train_decisions, rec.lc, r.adversary_loss, cfg.reweight_threshold,
                                                  &rec.r);
          for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] *= rw[i];
            rec.weight_min = std::min(rec.weight_min, rw[i]);
            rec.weight_max = std::max(rec.weight_max, rw[i]);
          }
        }
      }
      if (!pretraining && fair) {
        const auto f = fairness_value(b, p, w, true);
        check_finite(f.value, "fairness objective", epoch);
        rec.l2 = f.value;
        for (std::size_t i = 0; i < p.size(); ++i) pred_grad[i] += cfg.lambda1 * f.prediction_grad[i];
      }
      rec.l1 = nnet::weighted_cross_entropy(p, b.y, w);
      check_finite(rec.l1, "generator loss", epoch);

      auto logit_grad = nnet::weighted_cross_entropy_logit_grad(p, b.y, w);
      Matrix grad_logits(p.size(), 1);
      for (std::size_t i = 0; i < p.size(); ++i) {
        grad_logits(i, 0) = l1_scale * logit_grad[i] + pred_grad[i] * p[i] * (1.0 - p[i]);
      }
      const auto grads = nnet::backward_from_logits(generator, cache, grad_logits, false);
      nnet::optimizer_step(generator, grads.parameters, gen_opt);
    }

    if (rec.weight_min > rec.weight_max) rec.weight_min = rec.weight_max = 1.0;
    const auto p_all = predict(generator, all.gx);
    rec.probe_accuracy = probe_accuracy(p_all, all.y);
    rec.probe_di = probe_di(p_all, all.z, z_card);
    last_probe_accuracy = rec.probe_accuracy;
    result.history.epochs.push_back(rec);
  }
  result.generator = std::move(generator);
  return result;
}

nnet::MLPModel train_logistic_baseline(const Dataset& train, const TrainConfig& cfg) {
  TrainConfig plain = cfg;
  plain.lambda1 = 0.0;
  plain.lambda2 = 0.0;
  plain.reweight = false;
  plain.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  auto generator = nnet::MLPModel::glorot(generator_spec(train.feature_dim(), train.z_cardinality(), plain), derive_seed(plain.seed, 0));
  auto opt = nnet::OptimizerState::adam(plain.generator_lr);
  const Batch all = full_batch(train, cfg.generator_sees_z);
  std::mt19937_64 shuffle_rng(derive_seed(plain.seed, 9));
  for (std::size_t epoch = 0; epoch < plain.epochs; ++epoch) {
    for (const auto& rows : epoch_batches(train.size(), plain, shuffle_rng)) {
      const Batch local = rows.size() == train.size() ? Batch{} : make_batch(train, rows, cfg.generator_sees_z);
      const Batch& b = rows.size() == train.size() ? all : local;
      const auto cache = nnet::forward_cached(generator, b.gx);
      const auto p = column0(cache.output);
      check_finite(nnet::weighted_cross_entropy(p, b.y, b.w), "classifier loss", epoch);
      const auto g = nnet::weighted_cross_entropy_logit_grad(p, b.y, b.w);
      Matrix grad_logits(p.size(), 1);
      std::copy(g.begin(), g.end(), grad_logits.data.begin());
      const auto grads = nnet::backward_from_logits(generator, cache, grad_logits, false);
      nnet::optimizer_step(generator, grads.parameters, opt);
    }
  }
  return generator;
}

std::vector<double> default_lambda1_grid(double lambda2, std::size_t points) {
  const double hi = std::max(0.0, 0.95 - lambda2);
  std::vector<double> grid;
  if (points <= 1) return {0.0};
  for (std::size_t k = 0; k < points; ++k) grid.push_back(hi * static_cast<double>(k) / static_cast<double>(points - 1));
  return grid;
}

LambdaSelection select_lambda1(const Dataset& train, const Dataset& val, const TrainConfig& base,
                               const LambdaSelectionOptions& options) {
  const auto grid = options.grid.empty() ? default_lambda1_grid(base.lambda2) : options.grid;
  const double h = options.holdout_fraction;
  if (!(h > 0.0 && h < 1.0)) throw ConfigError("holdout_fraction must be in (0, 1)");
  const auto parts = split(train, {1.0 - h, 0.0, h}, derive_seed(base.seed, 10));
  const auto& fit = parts.train;
  const auto& holdout = parts.test;

  LambdaSelection sel;
  for (double l1 : grid) {
    TrainConfig cfg = base;
    cfg.lambda1 = l1;
    if (cfg.lambda1 + cfg.lambda2 >= 1.0) continue;
    const auto model = train_frtrain(fit, val, cfg).generator;
    const auto decisions = decide(predict(model, holdout));
    LambdaCandidate c;
    c.lambda1 = l1;
    c.holdout_accuracy = metrics::accuracy(decisions, holdout.labels());
    try {
      c.holdout_di = metrics::disparate_impact(decisions, holdout.sensitive(), holdout.z_cardinality());
    } catch (const UndefinedGroupError&) {
      c.holdout_di = 0.0;
    }
    sel.candidates.push_back(c);
  }
  if (sel.candidates.empty()) throw ConfigError("select_lambda1: no feasible lambda1 in the grid");

  const LambdaCandidate* best = nullptr;
  for (const auto& c : sel.candidates) {
    if (c.holdout_di >= options.target_di && (best == nullptr || c.holdout_accuracy > best->holdout_accuracy)) best = &c;
  }
  if (best == nullptr) {
    for (const auto& c : sel.candidates) {
      if (best == nullptr || c.holdout_di > best->holdout_di) best = &c;
    }
  }
  sel.lambda1 = best->lambda1;
  return sel;
}

}  // namespace frtrain::trainer
