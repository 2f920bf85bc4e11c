#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "frtrain/dataset.hpp"
#include "frtrain/nnet.hpp"

namespace frtrain::poison {

enum class Strategy { degradation_surrogate, random };

struct PoisonSpec {
  int target_group = 1;
  double fraction = 0.1;  // of the whole training set
  Strategy strategy = Strategy::degradation_surrogate;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PoisonResult {
  Dataset data;
  std::vector<std::size_t> flipped;  // ascending
};

// ceil(fraction * m), with a small guard against representation noise.
std::size_t flip_budget(std::size_t m, double fraction);

// Flips exactly flip_budget(|d|, fraction) labels inside the target group.
// The surrogate strategy ranks the group by correct-classification margin of
// `reference` (a logistic model trained on `d` when null) and flips the most
// confident ones.
PoisonResult flip_labels(const Dataset& d, const PoisonSpec& spec, const nnet::MLPModel* reference = nullptr);

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

}  // namespace frtrain::poison
