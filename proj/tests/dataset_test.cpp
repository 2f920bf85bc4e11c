#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "frtrain/dataset.hpp"
#include "frtrain/error.hpp"
#include "gtest/gtest.h"

namespace frtrain {
namespace {

// Independent bivariate normal density: explicit inverse and determinant.
double density(const Vec2& mu, const Mat2& s, double x, double y) {
  const double det = s[0] * s[3] - s[1] * s[2];
  const double i00 = s[3] / det, i01 = -s[1] / det, i11 = s[0] / det;
  const double dx = x - mu[0], dy = y - mu[1];
  const double q = dx * (i00 * dx + i01 * dy) + dy * (i01 * dx + i11 * dy);
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

double oracle_probability(const SyntheticSpec& s, double x, double y) {
  const double c = std::cos(s.rotation_angle), n = std::sin(s.rotation_angle);
  const double rx = c * x - n * y, ry = n * x + c * y;
  const double fp = density(s.mean_pos, s.cov_pos, rx, ry);
  const double fn = density(s.mean_neg, s.cov_neg, rx, ry);
  return fp / (fp + fn);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("frtrain_dataset_test_" + name);
}

TEST(Synthetic, ClassMeansAndPriorMatchSpec) {
  const SyntheticSpec spec;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto d = generate_synthetic(spec, seed);
    ASSERT_EQ(d.size(), 2000u);
    double sx[2] = {0, 0}, sy[2] = {0, 0};
    std::size_t count[2] = {0, 0};
    for (const auto& e : d.examples()) {
      sx[e.label] += e.features[0];
      sy[e.label] += e.features[1];
      ++count[e.label];
    }
    EXPECT_NEAR(sx[1] / count[1], 2.0, 0.2);
    EXPECT_NEAR(sy[1] / count[1], 2.0, 0.2);
    EXPECT_NEAR(sx[0] / count[0], -2.0, 0.2);
    EXPECT_NEAR(sy[0] / count[0], -2.0, 0.2);
    EXPECT_NEAR(count[1] / 2000.0, spec.label_prior, 0.03);
  }
}

TEST(Synthetic, ClassCovariancesMatchSpec) {
  const SyntheticSpec spec;
  const auto d = generate_synthetic(spec, 7);
  for (int label : {0, 1}) {
    std::vector<Vec2> pts;
    for (const auto& e : d.examples())
      if (e.label == label) pts.push_back({e.features[0], e.features[1]});
    double mx = 0, my = 0;
    for (const auto& p : pts) {
      mx += p[0];
      my += p[1];
    }
    mx /= pts.size();
    my /= pts.size();
    double c[4] = {0, 0, 0, 0};
    for (const auto& p : pts) {
      c[0] += (p[0] - mx) * (p[0] - mx);
      c[1] += (p[0] - mx) * (p[1] - my);
      c[3] += (p[1] - my) * (p[1] - my);
    }
    c[2] = c[1];
    const auto& want = label == 1 ? spec.cov_pos : spec.cov_neg;
    double frob = 0;
    for (int k = 0; k < 4; ++k) frob += std::pow(c[k] / (pts.size() - 1) - want[k], 2);
    EXPECT_LE(std::sqrt(frob), 1.0) << "label " << label;
  }
}

TEST(Synthetic, EmptyAndDeterministic) {
  SyntheticSpec spec;
  spec.n = 0;
  EXPECT_TRUE(generate_synthetic(spec, 3).empty());
  spec.n = 500;
  EXPECT_EQ(generate_synthetic(spec, 3), generate_synthetic(spec, 3));
  EXPECT_FALSE(generate_synthetic(spec, 3) == generate_synthetic(spec, 4));
}

TEST(Synthetic, NonSpdCovarianceIsRejected) {
  SyntheticSpec spec;
  spec.cov_pos = {1.0, 2.0, 2.0, 1.0};
  EXPECT_THROW(generate_synthetic(spec, 0), InvalidSpecError);
  spec = {};
  spec.cov_neg = {1.0, 0.5, 0.0, 1.0};
  EXPECT_THROW(spec.validate(), InvalidSpecError);
}

TEST(Synthetic, SensitiveProbabilityMatchesIndependentDensity) {
  const SyntheticSpec spec;
  for (double x = -6; x <= 6; x += 1.5)
    for (double y = -6; y <= 6; y += 1.5) EXPECT_NEAR(sensitive_probability(spec, {x, y}), oracle_probability(spec, x, y), 1e-12);
}

TEST(Synthetic, EqualDensityPointGivesOneHalf) {
  const SyntheticSpec spec;
  // Bisection along the segment between the two rotated-back class means.
  const double c = std::cos(-spec.rotation_angle), s = std::sin(-spec.rotation_angle);
  auto point = [&](double t) {
    const double rx = -2 + 4 * t, ry = -2 + 4 * t;
    return Vec2{c * rx - s * ry, s * rx + c * ry};
  };
  double lo = 0.0, hi = 1.0;
  ASSERT_LT(oracle_probability(spec, point(lo)[0], point(lo)[1]), 0.5);
  ASSERT_GT(oracle_probability(spec, point(hi)[0], point(hi)[1]), 0.5);
  for (int k = 0; k < 100; ++k) {
    const double mid = 0.5 * (lo + hi);
    (oracle_probability(spec, point(mid)[0], point(mid)[1]) < 0.5 ? lo : hi) = mid;
  }
  const auto x = point(lo);
  EXPECT_NEAR(sensitive_probability(spec, x), 0.5, 1e-9);

  // Monte Carlo: examples whose oracle probability is near one half.
  SyntheticSpec big = spec;
  big.n = 200000;
  const auto d = generate_synthetic(big, 11);
  std::size_t near = 0, ones = 0;
  for (const auto& e : d.examples()) {
    const double p = oracle_probability(spec, e.features[0], e.features[1]);
    if (std::abs(p - 0.5) < 0.02) {
      ++near;
      ones += e.sensitive;
    }
  }
  ASSERT_GT(near, 1000u);
  EXPECT_NEAR(static_cast<double>(ones) / near, 0.5, 0.05);
}

TEST(Split, SizesAndPartition) {
  SyntheticSpec spec;
  const auto d = generate_synthetic(spec, 1);
  const auto s = split(d, {0.8, 0.1, 0.1}, 5);
  EXPECT_EQ(s.train.size(), 1600u);
  EXPECT_EQ(s.val.size(), 200u);
  EXPECT_EQ(s.test.size(), 200u);

  std::multiset<std::vector<double>> original, joined;
  for (const auto& e : d.examples()) original.insert({e.features[0], e.features[1], double(e.sensitive), double(e.label)});
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (const auto& e : part->examples()) joined.insert({e.features[0], e.features[1], double(e.sensitive), double(e.label)});
  EXPECT_EQ(original, joined);

  const auto again = split(d, {0.8, 0.1, 0.1}, 5);
  EXPECT_EQ(again.train, s.train);
  EXPECT_EQ(again.val, s.val);
  EXPECT_EQ(again.test, s.test);
}

TEST(Split, DegenerateFractions) {
  SyntheticSpec spec;
  spec.n = 37;
  const auto d = generate_synthetic(spec, 1);
  const auto s = split(d, {1.0, 0.0, 0.0}, 9);
  EXPECT_EQ(s.train, d);
  EXPECT_TRUE(s.val.empty());
  EXPECT_TRUE(s.test.empty());
  EXPECT_THROW(split(d, {0.5, 0.2, 0.2}, 0), InvalidSpecError);
  const auto empty = split(Dataset(2, 2), {0.8, 0.1, 0.1}, 0);
  EXPECT_TRUE(empty.train.empty() && empty.val.empty() && empty.test.empty());
}

TEST(Csv, LoadsWellFormedFile) {
  const auto path = temp_file("three.csv");
  std::ofstream(path) << "x0,x1,z,y\n1.5,-2,0,1\n0.25,3,1,0\n-1,0,1,1\n";
  const auto d = load_csv(path.string());
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0], (Example{{1.5, -2.0}, 0, 1, 1.0}));
  EXPECT_EQ(d[1], (Example{{0.25, 3.0}, 1, 0, 1.0}));
  EXPECT_EQ(d[2], (Example{{-1.0, 0.0}, 1, 1, 1.0}));
}

TEST(Csv, BadLabelNamesRowAndColumn) {
  const auto path = temp_file("bad.csv");
  std::ofstream(path) << "x0,z,y\n1,0,1\n2,1,2\n";
  try {
    load_csv(path.string());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'y'"), std::string::npos) << msg;
  }
  std::ofstream(path) << "x0,y\n1,0\n";
  EXPECT_THROW(load_csv(path.string()), ParseError);
  std::ofstream(path) << "x0,z,y\nabc,0,1\n";
  EXPECT_THROW(load_csv(path.string()), ParseError);
}

TEST(Csv, RoundTripIsExact) {
  const auto d = generate_synthetic(SyntheticSpec{}, 3);
  const auto path = temp_file("roundtrip.csv");
  save_csv(d, path.string());
  EXPECT_EQ(load_csv(path.string()), d);
}

TEST(Csv, NamedColumnsSchema) {
  const auto path = temp_file("named.csv");
  std::ofstream(path) << "age,sex,priors,label\n30,1,2,0\n45,0,0,1\n";
  CsvSchema schema;
  schema.feature_columns = {"age", "priors"};
  schema.sensitive_column = "sex";
  schema.label_column = "label";
  const auto d = load_csv(path.string(), schema);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].features, (std::vector<double>{30, 2}));
  EXPECT_EQ(d[1].sensitive, 0);
  EXPECT_EQ(d[1].label, 1);
}

std::vector<CrowdResponse> ratings(int question, std::initializer_list<int> values, int worker = 0) {
  std::vector<CrowdResponse> out;
  for (int v : values) out.push_back({question, worker++, v});
  return out;
}

TEST(Crowd, AggregationExamples) {
  EXPECT_EQ(aggregate_crowd_labels(ratings(1, {3, 4, 4}), 11, 2.5).at(1), 1);
  EXPECT_EQ(aggregate_crowd_labels(ratings(1, {1}), 11, 2.5).at(1), 0);
  EXPECT_EQ(aggregate_crowd_labels(ratings(1, {4, 1, 1}), 2, 2.5).at(1), 1);
  EXPECT_EQ(aggregate_crowd_labels(ratings(1, {4, 1, 1}), 3, 2.5).at(1), 0);
  EXPECT_TRUE(aggregate_crowd_labels({}, 11).empty());
  EXPECT_THROW(aggregate_crowd_labels(ratings(1, {2}), 0), InvalidSpecError);
}

TEST(Crowd, RaisingARatingNeverLowersALabel) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<CrowdResponse> r;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < n; ++k) r.push_back({static_cast<int>(rng() % 3), k, 1 + static_cast<int>(rng() % 4)});
    const auto base = aggregate_crowd_labels(r, 4);
    const std::size_t pick = rng() % r.size();
    if (r[pick].rating == 4) continue;
    ++r[pick].rating;
    const auto raised = aggregate_crowd_labels(r, 4);
    for (const auto& [q, label] : base) EXPECT_GE(raised.at(q), label);
  }
}

TEST(Crowd, WorkerFilter) {
  const std::map<int, int> gold{{100, 1}, {101, 0}, {102, 1}, {103, 0}, {104, 1}};
  // worker 1: all five gold correct; worker 2: none correct; worker 3: 3 of 5; worker 4: no gold answers.
  std::vector<CrowdResponse> r{{100, 1, 4}, {101, 1, 1}, {102, 1, 3}, {103, 1, 2}, {104, 1, 4}, {1, 1, 3},
                               {100, 2, 1}, {101, 2, 4}, {102, 2, 2}, {103, 2, 3}, {104, 2, 1}, {1, 2, 1},
                               {100, 3, 4}, {101, 3, 1}, {102, 3, 4}, {103, 3, 4}, {104, 3, 2}, {1, 3, 4},
                               {1, 4, 2}};
  std::vector<CrowdResponse> expect_half, expect_strict;
  for (const auto& x : r) {
    if (x.worker_id != 2) expect_half.push_back(x);
    if (x.worker_id == 1 || x.worker_id == 4) expect_strict.push_back(x);
  }
  EXPECT_EQ(filter_workers(r, gold, 0.5), expect_half);
  EXPECT_EQ(filter_workers(r, gold, 0.7), expect_strict);
  EXPECT_THROW(filter_workers(r, {}, 0.5), InvalidSpecError);
}

}  // namespace
}  // namespace frtrain
