#include <algorithm>

#include "frtrain/error.hpp"
#include "frtrain/poison.hpp"
#include "frtrain/trainer.hpp"
#include "gtest/gtest.h"

namespace frtrain::poison {
namespace {

Dataset synthetic(std::uint64_t seed, std::size_t n = 2000) {
  SyntheticSpec s;
  s.n = n;
  return generate_synthetic(s, seed);
}

TEST(FlipBudget, CeilingOfFractionTimesSize) {
  EXPECT_EQ(flip_budget(2000, 0.1), 200u);
  EXPECT_EQ(flip_budget(2000, 0.0), 0u);
  EXPECT_EQ(flip_budget(10, 0.15), 2u);
  EXPECT_EQ(flip_budget(1600, 0.3), 480u);
  EXPECT_EQ(flip_budget(7, 1.0 / 7.0), 1u);
}

class FlipLabels : public ::testing::TestWithParam<Strategy> {};

TEST_P(FlipLabels, FlipsExactlyTheBudgetInsideTheGroup) {
  const auto d = synthetic(0);
  PoisonSpec spec;
  spec.strategy = GetParam();
  spec.seed = 3;
  const auto r = flip_labels(d, spec);
  ASSERT_EQ(r.flipped.size(), 200u);
  EXPECT_TRUE(std::is_sorted(r.flipped.begin(), r.flipped.end()));
  EXPECT_EQ(r.data.poisoned_indices(), r.flipped);
  std::size_t k = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const bool flipped = k < r.flipped.size() && r.flipped[k] == i;
    if (flipped) {
      ++k;
      EXPECT_EQ(d[i].sensitive, 1);
      EXPECT_EQ(r.data[i].label, 1 - d[i].label);
      auto restored = r.data[i];
      restored.label = d[i].label;
      EXPECT_EQ(restored, d[i]);
    } else {
      EXPECT_EQ(r.data[i], d[i]);
    }
  }
  EXPECT_EQ(flip_labels(d, spec).flipped, r.flipped);
}

INSTANTIATE_TEST_SUITE_P(Strategies, FlipLabels, ::testing::Values(Strategy::degradation_surrogate, Strategy::random));

TEST(FlipLabelsEdge, ZeroFractionIsIdentity) {
  const auto d = synthetic(1, 300);
  PoisonSpec spec;
  spec.fraction = 0.0;
  const auto r = flip_labels(d, spec);
  EXPECT_TRUE(r.flipped.empty());
  EXPECT_EQ(r.data, d);
}

TEST(FlipLabelsEdge, BudgetBeyondGroupIsAnError) {
  const auto d = synthetic(1, 300);
  PoisonSpec spec;
  spec.fraction = 0.9;
  EXPECT_THROW(flip_labels(d, spec), InvalidSpecError);
  spec.fraction = 0.1;
  spec.target_group = 2;
  EXPECT_THROW(flip_labels(d, spec), InvalidSpecError);
  spec.target_group = 1;
  spec.fraction = 1.5;
  EXPECT_THROW(spec.validate(), InvalidSpecError);
}

TEST(FlipLabelsEdge, RandomStrategyDependsOnSeed) {
  const auto d = synthetic(2, 500);
  PoisonSpec spec;
  spec.strategy = Strategy::random;
  spec.seed = 1;
  const auto a = flip_labels(d, spec).flipped;
  spec.seed = 2;
  EXPECT_NE(flip_labels(d, spec).flipped, a);
}

TEST(FlipLabelsEdge, SurrogateFlipsTheMostConfidentlyCorrect) {
  const auto d = synthetic(4, 400);
  trainer::TrainConfig cfg;
  cfg.generator_sees_z = false;
  cfg.epochs = 200;
  const auto reference = trainer::train_logistic_baseline(d, cfg);
  PoisonSpec spec;
  spec.fraction = 0.05;
  const auto r = flip_labels(d, spec, &reference);
  const auto p = trainer::predict(reference, d);
  auto margin = [&](std::size_t i) { return (2 * d[i].label - 1) * (p[i] - 0.5); };
  double weakest_flipped = 1e9, strongest_kept = -1e9;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].sensitive != 1) continue;
    if (std::binary_search(r.flipped.begin(), r.flipped.end(), i))
      weakest_flipped = std::min(weakest_flipped, margin(i));
    else
      strongest_kept = std::max(strongest_kept, margin(i));
  }
  EXPECT_GE(weakest_flipped, strongest_kept);
}

TEST(FlipLabelsEdge, SurrogateDegradesMoreThanRandom) {
  trainer::TrainConfig cfg;
  cfg.generator_sees_z = false;
  double surrogate_acc = 0.0, random_acc = 0.0;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto train = synthetic(seed);
    const auto test = synthetic(100 + seed);
    for (auto strategy : {Strategy::degradation_surrogate, Strategy::random}) {
      PoisonSpec spec;
      spec.strategy = strategy;
      spec.seed = seed;
      const auto poisoned = flip_labels(train, spec).data;
      const double acc = trainer::evaluate(trainer::train_logistic_baseline(poisoned, cfg), test).accuracy;
      (strategy == Strategy::random ? random_acc : surrogate_acc) += acc / 3.0;
    }
  }
  EXPECT_LE(surrogate_acc, random_acc);
}

TEST(StrategyNames, RoundTrip) {
  for (auto s : {Strategy::degradation_surrogate, Strategy::random}) EXPECT_EQ(strategy_from_string(to_string(s)), s);
  EXPECT_THROW(strategy_from_string("optimal"), InvalidSpecError);
}

}  // namespace
}  // namespace frtrain::poison
