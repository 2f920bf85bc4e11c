#include "frtrain/poison.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "frtrain/error.hpp"
#include "frtrain/trainer.hpp"

namespace frtrain::poison {

void PoisonSpec::validate() const {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidSpecError("poison fraction must be in [0, 1]");
  if (target_group < 0) throw InvalidSpecError("poison target group must be nonnegative");
}

std::size_t flip_budget(std::size_t m, double fraction) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m) - 1e-9));
}

std::string to_string(Strategy s) { return s == Strategy::random ? "random" : "degradation-surrogate"; }

Strategy strategy_from_string(const std::string& s) {
  if (s == "random") return Strategy::random;
  if (s == "degradation-surrogate" || s == "surrogate") return Strategy::degradation_surrogate;
  throw InvalidSpecError("unknown poison strategy '" + s + "'");
}

PoisonResult flip_labels(const Dataset& d, const PoisonSpec& spec, const nnet::MLPModel* reference) {
  spec.validate();
  if (spec.target_group >= d.z_cardinality()) throw InvalidSpecError("poison target group outside the sensitive range");
  std::vector<std::size_t> group;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].sensitive == spec.target_group) group.push_back(i);
  }
  const std::size_t budget = flip_budget(d.size(), spec.fraction);
  if (budget > group.size()) {
    throw InvalidSpecError("poison budget " + std::to_string(budget) + " exceeds target group size " +
                           std::to_string(group.size()));
  }
  if (budget == 0) return {d, {}};

  if (spec.strategy == Strategy::random) {
    std::mt19937_64 rng(spec.seed);
    std::shuffle(group.begin(), group.end(), rng);
  } else {
    nnet::MLPModel trained;
    if (reference == nullptr) {
      trainer::TrainConfig cfg;
      cfg.seed = spec.seed;
      cfg.epochs = 500;
      cfg.generator_lr = 0.05;
      trained = trainer::train_logistic_baseline(d, cfg);
      reference = &trained;
    }
    const auto logits = nnet::forward_cached(*reference, trainer::generator_inputs(*reference, d)).logits;
    std::vector<double> margin(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) margin[i] = (2.0 * d[i].label - 1.0) * logits(i, 0);
    std::stable_sort(group.begin(), group.end(), [&](std::size_t a, std::size_t b) { return margin[a] > margin[b]; });
  }
  std::vector<std::size_t> flipped(group.begin(), group.begin() + static_cast<long>(budget));
  std::sort(flipped.begin(), flipped.end());

  auto examples = d.examples();
  for (std::size_t i : flipped) examples[i].label = 1 - examples[i].label;
  std::vector<std::size_t> poisoned = d.poisoned_indices();
  poisoned.insert(poisoned.end(), flipped.begin(), flipped.end());
  std::sort(poisoned.begin(), poisoned.end());
  poisoned.erase(std::unique(poisoned.begin(), poisoned.end()), poisoned.end());
  return {Dataset(d.feature_dim(), d.z_cardinality(), std::move(examples), std::move(poisoned)), flipped};
}

}  // namespace frtrain::poison
