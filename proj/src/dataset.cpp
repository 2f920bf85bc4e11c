#include "frtrain/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "frtrain/error.hpp"
#include "frtrain/kernels.hpp"

namespace frtrain {

Dataset::Dataset(std::size_t feature_dim, int z_cardinality, std::vector<Example> examples,
                 std::vector<std::size_t> poisoned_indices)
    : feature_dim_(feature_dim),
      z_cardinality_(z_cardinality),
      examples_(std::move(examples)),
      poisoned_(std::move(poisoned_indices)) {
  if (feature_dim_ == 0) throw InvalidSpecError("Dataset: feature_dim must be positive");
  if (z_cardinality_ < 2) throw InvalidSpecError("Dataset: z_cardinality must be at least 2");
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const auto& e = examples_[i];
    if (e.features.size() != feature_dim_) {
      throw InvalidSpecError("Dataset: example " + std::to_string(i) + " has " + std::to_string(e.features.size()) +
                             " features, expected " + std::to_string(feature_dim_));
    }
    if (e.sensitive < 0 || e.sensitive >= z_cardinality_) {
      throw InvalidSpecError("Dataset: example " + std::to_string(i) + " has sensitive code " +
                             std::to_string(e.sensitive) + " outside [0, " + std::to_string(z_cardinality_) + ")");
    }
    if (e.label != 0 && e.label != 1) {
      throw InvalidSpecError("Dataset: example " + std::to_string(i) + " has non-binary label");
    }
    if (!(e.weight >= 0.0)) throw InvalidSpecError("Dataset: example " + std::to_string(i) + " has negative weight");
  }
  std::sort(poisoned_.begin(), poisoned_.end());
  poisoned_.erase(std::unique(poisoned_.begin(), poisoned_.end()), poisoned_.end());
  if (!poisoned_.empty() && poisoned_.back() >= examples_.size()) {
    throw InvalidSpecError("Dataset: poisoned index out of range");
  }
}

Matrix Dataset::features() const {
  Matrix m(examples_.size(), feature_dim_);
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    std::copy(examples_[i].features.begin(), examples_[i].features.end(), m.row(i).begin());
  }
  return m;
}

std::vector<int> Dataset::sensitive() const {
  std::vector<int> out(examples_.size());
  std::transform(examples_.begin(), examples_.end(), out.begin(), [](const Example& e) { return e.sensitive; });
  return out;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out(examples_.size());
  std::transform(examples_.begin(), examples_.end(), out.begin(), [](const Example& e) { return e.label; });
  return out;
}

std::vector<double> Dataset::weights() const {
  std::vector<double> out(examples_.size());
  std::transform(examples_.begin(), examples_.end(), out.begin(), [](const Example& e) { return e.weight; });
  return out;
}

std::size_t Dataset::count_group(int z) const {
  return static_cast<std::size_t>(
      std::count_if(examples_.begin(), examples_.end(), [z](const Example& e) { return e.sensitive == z; }));
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Example> picked;
  picked.reserve(indices.size());
  std::vector<std::size_t> poisoned;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices.at(k);
    if (i >= examples_.size()) throw InvalidSpecError("Dataset::subset: index out of range");
    picked.push_back(examples_[i]);
    if (std::binary_search(poisoned_.begin(), poisoned_.end(), i)) poisoned.push_back(k);
  }
  return Dataset(feature_dim_, z_cardinality_, std::move(picked), std::move(poisoned));
}

// --- synthetic ----------------------------------------------------------------

namespace {

struct Cholesky2 {
  double l11, l21, l22;
};

bool is_spd(const Mat2& c) {
  return std::abs(c[1] - c[2]) <= 1e-12 * std::max(1.0, std::abs(c[1])) && c[0] > 0.0 &&
         c[0] * c[3] - c[1] * c[2] > 0.0;
}

Cholesky2 cholesky(const Mat2& c) {
  const double l11 = std::sqrt(c[0]);
  const double l21 = c[2] / l11;
  return {l11, l21, std::sqrt(c[3] - l21 * l21)};
}

double log_gaussian_density(const Vec2& mean, const Mat2& cov, const Vec2& x) {
  const double det = cov[0] * cov[3] - cov[1] * cov[2];
  const double dx = x[0] - mean[0];
  const double dy = x[1] - mean[1];
  // (x - mu)^T Sigma^{-1} (x - mu) with the 2x2 adjugate
  const double quad = (cov[3] * dx * dx - (cov[1] + cov[2]) * dx * dy + cov[0] * dy * dy) / det;
  return -0.5 * quad - std::log(2.0 * M_PI) - 0.5 * std::log(det);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (!is_spd(cov_neg)) throw InvalidSpecError("SyntheticSpec: cov_neg is not symmetric positive-definite");
  if (!is_spd(cov_pos)) throw InvalidSpecError("SyntheticSpec: cov_pos is not symmetric positive-definite");
  if (!(label_prior > 0.0 && label_prior < 1.0)) throw InvalidSpecError("SyntheticSpec: label_prior must be in (0,1)");
}

double gaussian_density(const Vec2& mean, const Mat2& cov, const Vec2& x) {
  if (!is_spd(cov)) throw InvalidSpecError("gaussian_density: covariance is not symmetric positive-definite");
  return std::exp(log_gaussian_density(mean, cov, x));
}

double sensitive_probability(const SyntheticSpec& spec, const Vec2& x) {
  const double c = std::cos(spec.rotation_angle);
  const double s = std::sin(spec.rotation_angle);
  const Vec2 rotated{x[0] * c - x[1] * s, x[0] * s + x[1] * c};
  const double log_pos = log_gaussian_density(spec.mean_pos, spec.cov_pos, rotated);
  const double log_neg = log_gaussian_density(spec.mean_neg, spec.cov_neg, rotated);
  // f+ / (f- + f+) evaluated in log space
  return kernels::sigmoid(log_pos - log_neg);
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution label_draw(spec.label_prior);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto chol_neg = cholesky(spec.cov_neg);
  const auto chol_pos = cholesky(spec.cov_pos);

  std::vector<Example> examples;
  examples.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Example e;
    e.label = label_draw(rng) ? 1 : 0;
    const auto& mean = e.label == 1 ? spec.mean_pos : spec.mean_neg;
    const auto& chol = e.label == 1 ? chol_pos : chol_neg;
    const double n1 = normal(rng);
    const double n2 = normal(rng);
    const Vec2 x{mean[0] + chol.l11 * n1, mean[1] + chol.l21 * n1 + chol.l22 * n2};
    e.features = {x[0], x[1]};
    e.sensitive = unit(rng) < sensitive_probability(spec, x) ? 1 : 0;
    examples.push_back(std::move(e));
  }
  return Dataset(2, 2, std::move(examples));
}

// --- split ----------------------------------------------------------------------

Splits split(const Dataset& d, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0.0 || f.val < 0.0 || f.test < 0.0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw InvalidSpecError("split: fractions must be nonnegative and sum to 1");
  }
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // The small epsilon keeps products like 0.1 * 2000 from flooring to 199.
  auto count = [n](double fraction) {
    return std::min(n, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9)));
  };
  const std::size_t n_val = count(f.val);
  const std::size_t n_test = std::min(n - n_val, count(f.test));
  const std::size_t n_train = n - n_val - n_test;

  auto take = [&](std::size_t begin, std::size_t len) {
    std::vector<std::size_t> idx(order.begin() + static_cast<long>(begin),
                                 order.begin() + static_cast<long>(begin + len));
    std::sort(idx.begin(), idx.end());
    return d.subset(idx);
  };
  return {take(0, n_train), take(n_train, n_val), take(n_train + n_val, n_test)};
}

}  // namespace frtrain
