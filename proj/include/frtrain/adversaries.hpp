#pragma once

// Mutual-information machinery.
//
// Exact side: closed-form (conditional) mutual information on small discrete
// joints, the optimal-discriminator value of the variational form
//   I(Z; Yhat) = max_{D on simplex} sum_z P(z) E[log D_z(Yhat) | z] + H(Z)
// and a direct numeric maximization over simplex tables.
//
// Empirical side: the objectives the fairness and robustness adversaries
// maximize during training, with gradients for both the adversary parameters
// and the classifier predictions feeding them. Entropy constants are part of
// the reported value but carry no gradient.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "frtrain/matrix.hpp"
#include "frtrain/nnet.hpp"

namespace frtrain::adversaries {

// Probability table over (c, a, b) with row-major layout. `conditions() == 1`
// is a plain joint over (a, b). For the fairness oracles a is the sensitive
// attribute, b the prediction and c the true label.
class DiscreteJoint {
 public:
  static constexpr std::size_t kMaxAlphabet = 8;

  DiscreteJoint(std::size_t size_a, std::size_t size_b, std::vector<double> pmf);
  DiscreteJoint(std::size_t conditions, std::size_t size_a, std::size_t size_b, std::vector<double> pmf);

  std::size_t conditions() const { return conditions_; }
  std::size_t size_a() const { return size_a_; }
  std::size_t size_b() const { return size_b_; }
  const std::vector<double>& pmf() const { return pmf_; }

  double operator()(std::size_t c, std::size_t a, std::size_t b) const {
    return pmf_[(c * size_a_ + a) * size_b_ + b];
  }
  std::size_t index(std::size_t c, std::size_t a, std::size_t b) const { return (c * size_a_ + a) * size_b_ + b; }

 private:
  std::size_t conditions_;
  std::size_t size_a_;
  std::size_t size_b_;
  std::vector<double> pmf_;
};

// Dirichlet(1) draw over all cells.
DiscreteJoint random_joint(std::size_t conditions, std::size_t size_a, std::size_t size_b, std::uint64_t seed);

// I(A; B) in nats; requires conditions() == 1.
double mi_exact(const DiscreteJoint& joint);
// I(A; B | C) in nats.
double cmi_exact(const DiscreteJoint& joint);

// sum_{c,a,b} P(c,a,b) log D(c,a,b) + H(A|C) for a table D that sums to one
// over a for every (c, b). This is the function the discriminator maximizes.
double discriminator_objective(const DiscreteJoint& joint, std::span<const double> table);

struct DiscriminatorMi {
  double value = 0.0;                 // objective at the posterior table
  std::vector<double> optimal_table;  // D*(c,a,b) = P(a | b, c), pmf layout
  double numeric_value = 0.0;         // numeric maximization over simplex tables
  double discrepancy = 0.0;           // |value - numeric_value|
};

struct TableAscentOptions {
  std::size_t steps = 10000;
  double step_size = 0.1;
};

DiscriminatorMi mi_via_discriminator(const DiscreteJoint& joint, const TableAscentOptions& options = {});
DiscriminatorMi cmi_via_discriminator(const DiscreteJoint& joint, const TableAscentOptions& options = {});

// Numeric maximization of discriminator_objective over softmax-parameterized
// tables by gradient ascent. Returns the maximizing table.
std::vector<double> maximize_discriminator_table(const DiscreteJoint& joint, const TableAscentOptions& options,
                                                 double* value_out = nullptr);

// --- empirical objectives ------------------------------------------------------

// Maps a prediction in (0,1) to a softmax over |Z| classes.
struct FairnessAdversary {
  nnet::MLPModel model;
};

// Maps (x, one-hot z, label-or-prediction) to P(example came from the clean validation set).
struct RobustnessAdversary {
  nnet::MLPModel model;
  int z_cardinality = 2;
};

FairnessAdversary make_fairness_adversary(int z_cardinality, std::uint64_t seed, std::size_t hidden_dim = 0);
RobustnessAdversary make_robustness_adversary(std::size_t feature_dim, int z_cardinality, std::size_t hidden_dim,
                                              std::uint64_t seed);

Matrix robustness_inputs(const Matrix& features, std::span<const int> z, std::span<const double> label_values,
                         int z_cardinality);

struct ObjectiveResult {
  double value = 0.0;
  // d value / d parameters, one entry per adversary head; empty when gradients were not requested.
  std::vector<std::vector<double>> adversary_grads;
  // d value / d prediction_i for the training examples.
  std::vector<double> prediction_grad;
};

// sum_i (w_i / m) log D_{z_i}(yhat_i) + H(Z)
ObjectiveResult fairness_objective_di(const FairnessAdversary& adversary, std::span<const double> predictions,
                                      std::span<const int> z, std::span<const double> weights,
                                      bool with_gradients = true);

// sum_y sum_{i: y_i = y} (w_i / m) log D^y_{z_i}(yhat_i) + H(Z|Y). heads[y] serves stratum y;
// strata without examples are skipped.
ObjectiveResult fairness_objective_eo(std::span<const FairnessAdversary> heads, std::span<const double> predictions,
                                      std::span<const int> z, std::span<const int> labels,
                                      std::span<const double> weights, bool with_gradients = true);

// The equalized-odds objective restricted to y = 1 examples, normalized by their count.
ObjectiveResult fairness_objective_eopp(const FairnessAdversary& adversary, std::span<const double> predictions,
                                        std::span<const int> z, std::span<const int> labels,
                                        std::span<const double> weights, bool with_gradients = true);

struct RobustnessResult : ObjectiveResult {
  std::vector<double> train_decisions;  // adversary output on each training triple
  double adversary_loss = 0.0;          // ln 2 - value
};

// (1 / 2m_val) sum_val log D(x, z, y) + (1 / 2m) sum_train log(1 - D(x, z, yhat)) + ln 2
RobustnessResult robustness_objective(const RobustnessAdversary& adversary, const Matrix& train_features,
                                      std::span<const int> train_z, std::span<const double> train_predictions,
                                      const Matrix& val_features, std::span<const int> val_z,
                                      std::span<const int> val_labels, bool with_gradients = true);

}  // namespace frtrain::adversaries
