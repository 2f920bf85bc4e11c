#include <cmath>
#include <random>

#include "frtrain/error.hpp"
#include "frtrain/metrics.hpp"
#include "gtest/gtest.h"
#include "test_support.hpp"

namespace frtrain::metrics {
namespace {

using testing::ToyLoans;

TEST(DisparateImpact, ToyLoanClassifiers) {
  const ToyLoans t;
  EXPECT_DOUBLE_EQ(disparate_impact(t.nonfair_clean(), t.z), 0.5);
  EXPECT_DOUBLE_EQ(accuracy(t.nonfair_clean(), t.clean), 1.0);
  EXPECT_DOUBLE_EQ(disparate_impact(t.fair_clean(), t.z), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(t.fair_clean(), t.clean), 0.8);
  EXPECT_NEAR(disparate_impact(t.nonfair_poisoned(), t.z), 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(accuracy(t.nonfair_poisoned(), t.clean), 0.9);
  EXPECT_DOUBLE_EQ(disparate_impact(t.fair_poisoned(), t.z), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(t.fair_poisoned(), t.clean), 0.6);
}

TEST(DisparateImpact, ZeroRateConventions) {
  const std::vector<int> z{0, 0, 1, 1};
  EXPECT_EQ(disparate_impact(std::vector<int>{0, 0, 0, 0}, z), 1.0);
  EXPECT_EQ(disparate_impact(std::vector<int>{1, 0, 0, 0}, z), 0.0);
  EXPECT_THROW(disparate_impact(std::vector<int>{1, 0}, std::vector<int>{1, 1}), UndefinedGroupError);
  EXPECT_THROW(disparate_impact(std::vector<int>{}, std::vector<int>{}), InvalidSpecError);
}

TEST(DisparateImpact, MultiGroupUsesWorstPair) {
  // rates: group 0 = 1/2, group 1 = 1, group 2 = 1/4
  const std::vector<int> p{1, 0, 1, 1, 1, 0, 0, 0};
  const std::vector<int> z{0, 0, 1, 1, 2, 2, 2, 2};
  EXPECT_DOUBLE_EQ(disparate_impact(p, z, 3), 0.25);
}

TEST(DisparateImpact, SymmetricAndPermutationInvariant) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> p(30), z(30);
    for (int i = 0; i < 30; ++i) {
      p[i] = static_cast<int>(rng() % 2);
      z[i] = i < 2 ? i : static_cast<int>(rng() % 2);
    }
    const double di = disparate_impact(p, z);
    EXPECT_GE(di, 0.0);
    EXPECT_LE(di, 1.0);
    std::vector<int> swapped(z);
    for (int& v : swapped) v = 1 - v;
    EXPECT_EQ(disparate_impact(p, swapped), di);
    std::vector<std::size_t> order(30);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> p2, z2;
    for (auto k : order) {
      p2.push_back(p[k]);
      z2.push_back(z[k]);
    }
    EXPECT_EQ(disparate_impact(p2, z2), di);
  }
}

TEST(EqualizedOdds, TwelveExampleFixture) {
  // y=0: z=0 has 2 of 4 positive, z=1 has 1 of 4. y=1: z=0 2 of 2, z=1 1 of 2.
  const std::vector<int> y{0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<int> z{0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 1, 1};
  const std::vector<int> p{1, 1, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0};
  const auto eo = equalized_odds(p, z, y);
  ASSERT_EQ(eo.size(), 2u);
  EXPECT_DOUBLE_EQ(eo.at(0), 0.5);
  EXPECT_DOUBLE_EQ(eo.at(1), 0.5);
  EXPECT_EQ(equal_opportunity(p, z, y), eo.at(1));

  const std::vector<int> fair{1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0};
  const auto balanced = equalized_odds(fair, z, y);
  EXPECT_EQ(balanced.at(0), 1.0);
  EXPECT_EQ(balanced.at(1), 1.0);
}

TEST(EqualizedOdds, MissingStratumIsAbsent) {
  const std::vector<int> y{0, 0, 1};
  const std::vector<int> z{0, 1, 0};
  const auto eo = equalized_odds(std::vector<int>{1, 1, 1}, z, y);
  EXPECT_EQ(eo.count(0), 1u);
  EXPECT_EQ(eo.count(1), 0u);
  EXPECT_FALSE(equal_opportunity(std::vector<int>{1, 1, 1}, z, y).has_value());
}

TEST(EqualizedOdds, EqualOpportunityIsTheYOneStratum) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> p(20), z(20), y(20);
    for (int i = 0; i < 20; ++i) {
      p[i] = static_cast<int>(rng() % 2);
      z[i] = i % 2;
      y[i] = (i / 2) % 2;
    }
    EXPECT_EQ(equal_opportunity(p, z, y).value(), equalized_odds(p, z, y).at(1));
  }
}

TEST(Confusion, GroupsSumToGlobalCounts) {
  std::mt19937_64 rng(1);
  std::vector<int> p(101), y(101), z(101);
  for (int i = 0; i < 101; ++i) {
    p[i] = static_cast<int>(rng() % 2);
    y[i] = static_cast<int>(rng() % 2);
    z[i] = static_cast<int>(rng() % 3);
  }
  const auto groups = confusion_by_group(p, y, z, 3);
  ASSERT_EQ(groups.size(), 3u);
  Confusion global{};
  for (int i = 0; i < 101; ++i) ++global[y[i]][p[i]];
  Confusion total{};
  std::size_t n = 0;
  for (const auto& g : groups)
    for (int a : {0, 1})
      for (int b : {0, 1}) {
        total[a][b] += g[a][b];
        n += g[a][b];
      }
  EXPECT_EQ(total, global);
  EXPECT_EQ(n, 101u);
}

TEST(Entropy, Examples) {
  EXPECT_NEAR(empirical_entropy(std::vector<int>{0, 1, 0, 1}), std::log(2.0), 1e-15);
  EXPECT_EQ(empirical_entropy(std::vector<int>{3, 3, 3}), 0.0);
  EXPECT_NEAR(empirical_entropy(std::vector<int>{0, 1, 2}), std::log(3.0), 1e-15);
  EXPECT_THROW(empirical_entropy(std::vector<int>{}), InvalidSpecError);
}

TEST(Report, CollectsEverything) {
  const ToyLoans t;
  const auto r = make_report(t.nonfair_poisoned(), t.clean, t.z);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.9);
  EXPECT_NEAR(r.disparate_impact, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.entropy_z, std::log(2.0), 1e-15);
  ASSERT_TRUE(r.equal_opportunity.has_value());
  EXPECT_EQ(*r.equal_opportunity, r.equalized_odds.at(1));
  const auto json = report_to_json(r);
  for (const char* key : {"accuracy", "disparate_impact", "equalized_odds", "equal_opportunity", "group_confusion",
                          "entropy_z"})
    EXPECT_NE(json.find(key), std::string::npos) << key;
}

TEST(Accuracy, LengthMismatch) {
  EXPECT_THROW(accuracy(std::vector<int>{1}, std::vector<int>{1, 0}), DimensionError);
}

}  // namespace
}  // namespace frtrain::metrics
