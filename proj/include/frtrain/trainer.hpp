#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "frtrain/dataset.hpp"
#include "frtrain/metrics.hpp"
#include "frtrain/nnet.hpp"
#include "json.hpp"

namespace frtrain::trainer {

enum class FairnessCriterion { di, eo, eopp };
enum class BatchMode { full, minibatch };

struct TrainConfig {
  double lambda1 = 0.0;             // fairness knob
  double lambda2 = 0.0;             // robustness knob
  double reweight_threshold = 1.0;  // C in R = sigmoid(L_c / L_d - C)
  FairnessCriterion fairness_criterion = FairnessCriterion::di;
  double generator_lr = 0.01;       // Adam
  double disc_lr = 0.5;             // SGD, fairness adversary
  double robust_disc_lr = 0.02;     // SGD, robustness adversary
  std::size_t epochs = 1000;        // total, pretraining included
  std::size_t pretrain_epochs = 100;
  // The fairness adversary stays frozen until the generator reaches this
  // training accuracy or this fraction of epochs has elapsed.
  double freeze_until_accuracy = 0.65;
  double freeze_max_fraction = 0.3;
  std::size_t update_ratio = 3;  // adversary steps per generator step
  bool reweight = true;
  std::uint64_t seed = 0;
  BatchMode batch_mode = BatchMode::full;
  std::size_t batch_size = 256;
  bool generator_sees_z = true;  // append z indicators to the generator input
  std::size_t generator_hidden = 0;
  std::size_t fairness_hidden = 0;
  std::size_t robust_hidden = 16;
  nnet::HiddenActivation hidden_activation = nnet::HiddenActivation::relu;

  void validate() const;
};

nlohmann::json config_to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});

struct EpochRecord {
  std::size_t epoch = 0;
  double l1 = 0.0;  // weighted generator cross entropy
  double l2 = 0.0;  // fairness objective (NaN when inactive)
  double l3 = 0.0;  // robustness objective (NaN when inactive)
  double lc = 0.0;  // unweighted classifier loss
  double ld = 0.0;  // robustness adversary loss (NaN when inactive)
  double r = 1.0;   // re-weighting gate
  double weight_min = 1.0;
  double weight_max = 1.0;
  double probe_accuracy = 0.0;
  double probe_di = 0.0;
  bool fairness_frozen = true;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

void write_history_csv(const TrainHistory& history, const std::string& path);

struct TrainResult {
  nnet::MLPModel generator;
  TrainHistory history;
};

// W_i = R + d_i (1 - R) with R = sigmoid(L_c / L_d - C). When L_d <= 0 the
// re-weighting is suspended and every weight is 1. `gate_out` receives R.
std::vector<double> compute_example_weights(std::span<const double> decisions, double classifier_loss,
                                            double discriminator_loss, double threshold, double* gate_out = nullptr);

TrainResult train_frtrain(const Dataset& train, const Dataset& val, const TrainConfig& cfg);

// Cross-entropy-only generator with the same initialization and schedule as
// train_frtrain.
nnet::MLPModel train_logistic_baseline(const Dataset& train, const TrainConfig& cfg);

nnet::MLPSpec generator_spec(std::size_t feature_dim, int z_cardinality, const TrainConfig& cfg);

// x, or x followed by indicators of z = 1 .. |Z|-1, depending on the model's input width.
Matrix generator_inputs(const nnet::MLPModel& model, const Dataset& data);

std::vector<double> predict(const nnet::MLPModel& model, const Matrix& inputs);
std::vector<double> predict(const nnet::MLPModel& model, const Dataset& data);
// Threshold 0.5; ties go to 1.
inline int decide(double probability) { return probability >= 0.5 ? 1 : 0; }
std::vector<int> decide(std::span<const double> probabilities);

metrics::MetricsReport evaluate(const nnet::MLPModel& model, const Dataset& data);

struct LambdaSelectionOptions {
  std::vector<double> grid;  // empty: 8 evenly spaced points in [0, 0.95 - lambda2]
  double target_di = 0.8;
  double holdout_fraction = 0.2;
};

struct LambdaCandidate {
  double lambda1 = 0.0;
  double holdout_accuracy = 0.0;
  double holdout_di = 0.0;
};

struct LambdaSelection {
  double lambda1 = 0.0;
  std::vector<LambdaCandidate> candidates;
};

std::vector<double> default_lambda1_grid(double lambda2, std::size_t points = 8);

// One-round cross validation: train on a split of `train`, score each lambda1
// on the held-out part, and pick the most accurate candidate whose held-out
// DI reaches the target (highest DI when none does).
LambdaSelection select_lambda1(const Dataset& train, const Dataset& val, const TrainConfig& base,
                               const LambdaSelectionOptions& options);

std::string to_string(FairnessCriterion c);
FairnessCriterion criterion_from_string(const std::string& s);

}  // namespace frtrain::trainer
