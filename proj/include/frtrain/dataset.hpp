#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "frtrain/matrix.hpp"

namespace frtrain {

struct Example {
  std::vector<double> features;
  int sensitive = 0;
  int label = 0;
  double weight = 1.0;

  bool operator==(const Example&) const = default;
};

// Immutable after construction; the constructor validates every example
// against the schema.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t feature_dim, int z_cardinality, std::vector<Example> examples = {},
          std::vector<std::size_t> poisoned_indices = {});

  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  std::size_t feature_dim() const { return feature_dim_; }
  int z_cardinality() const { return z_cardinality_; }
  const std::vector<Example>& examples() const { return examples_; }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  const std::vector<std::size_t>& poisoned_indices() const { return poisoned_; }

  Matrix features() const;
  std::vector<int> sensitive() const;
  std::vector<int> labels() const;
  std::vector<double> weights() const;
  std::size_t count_group(int z) const;

  // Examples at `indices`, in that order; poisoned indices are remapped.
  Dataset subset(const std::vector<std::size_t>& indices) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t feature_dim_ = 1;
  int z_cardinality_ = 2;
  std::vector<Example> examples_;
  std::vector<std::size_t> poisoned_;
};

// --- synthetic data ---------------------------------------------------------

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<double, 4>;  // row-major {a, b, c, d}

struct SyntheticSpec {
  std::size_t n = 2000;
  Vec2 mean_neg{-2.0, -2.0};
  Mat2 cov_neg{10.0, 1.0, 1.0, 3.0};
  Vec2 mean_pos{2.0, 2.0};
  Mat2 cov_pos{5.0, 1.0, 1.0, 5.0};
  double rotation_angle = -0.78539816339744830962;  // -pi/4, see README
  double label_prior = 0.5;                         // P(y = 1)

  void validate() const;
};

double gaussian_density(const Vec2& mean, const Mat2& cov, const Vec2& x);
// p(z = 1 | x): the positive-class share of the two class densities at x rotated by the spec angle.
double sensitive_probability(const SyntheticSpec& spec, const Vec2& x);
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// --- splitting ----------------------------------------------------------------

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Shuffles indices with `seed`; val and test sizes are floor(fraction * n),
// the remainder goes to train. Each split keeps the input order.
Splits split(const Dataset& d, const SplitFractions& fractions, std::uint64_t seed);

// --- CSV ----------------------------------------------------------------------

struct CsvSchema {
  std::vector<std::string> feature_columns;  // empty: every x<k> column in index order
  std::string sensitive_column = "z";
  std::string label_column = "y";
  std::string weight_column = "w";  // optional in the file
  int z_cardinality = 0;            // 0: inferred as max(z) + 1, at least 2
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
void save_csv(const Dataset& d, const std::string& path);

// --- crowd labels -------------------------------------------------------------

struct CrowdResponse {
  int question_id = 0;
  int worker_id = 0;
  int rating = 1;  // 1..4

  bool operator==(const CrowdResponse&) const = default;
};

inline constexpr double kCrowdThreshold = 2.5;

// Averages the first n_max ratings per question (input order); label 1 iff average >= threshold.
std::map<int, int> aggregate_crowd_labels(const std::vector<CrowdResponse>& responses, std::size_t n_max,
                                          double threshold = kCrowdThreshold);
// Drops every response of workers whose binarized accuracy on gold questions is
// below min_accuracy. Workers without gold answers are kept.
std::vector<CrowdResponse> filter_workers(const std::vector<CrowdResponse>& responses,
                                          const std::map<int, int>& gold, double min_accuracy);

std::vector<CrowdResponse> load_crowd_csv(const std::string& path);
// Reads `question_id, label` pairs.
std::map<int, int> load_gold_csv(const std::string& path);

}  // namespace frtrain
