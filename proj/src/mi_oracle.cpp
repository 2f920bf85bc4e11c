#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "frtrain/adversaries.hpp"
#include "frtrain/error.hpp"

namespace frtrain::adversaries {

namespace {

constexpr double kNormalizationTolerance = 1e-12;

double xlogy(double x, double y) { return x > 0.0 ? x * std::log(y) : 0.0; }

struct Marginals {
  std::vector<double> c;   // P(c)
  std::vector<double> ca;  // P(c, a)
  std::vector<double> cb;  // P(c, b)
};

Marginals marginals(const DiscreteJoint& j) {
  Marginals m{std::vector<double>(j.conditions(), 0.0), std::vector<double>(j.conditions() * j.size_a(), 0.0),
              std::vector<double>(j.conditions() * j.size_b(), 0.0)};
  for (std::size_t c = 0; c < j.conditions(); ++c) {
    for (std::size_t a = 0; a < j.size_a(); ++a) {
      for (std::size_t b = 0; b < j.size_b(); ++b) {
        const double p = j(c, a, b);
        m.c[c] += p;
        m.ca[c * j.size_a() + a] += p;
        m.cb[c * j.size_b() + b] += p;
      }
    }
  }
  return m;
}

double conditional_entropy_a(const DiscreteJoint& j, const Marginals& m) {
  double h = 0.0;
  for (std::size_t c = 0; c < j.conditions(); ++c) {
    for (std::size_t a = 0; a < j.size_a(); ++a) {
      const double p = m.ca[c * j.size_a() + a];
      if (p > 0.0) h -= p * std::log(p / m.c[c]);
    }
  }
  return h;
}

std::vector<double> posterior_table(const DiscreteJoint& j, const Marginals& m) {
  std::vector<double> table(j.pmf().size(), 0.0);
  for (std::size_t c = 0; c < j.conditions(); ++c) {
    for (std::size_t b = 0; b < j.size_b(); ++b) {
      const double pcb = m.cb[c * j.size_b() + b];
      for (std::size_t a = 0; a < j.size_a(); ++a) {
        double d;
        if (pcb > 0.0) {
          d = j(c, a, b) / pcb;
        } else if (m.c[c] > 0.0) {
          d = m.ca[c * j.size_a() + a] / m.c[c];  // unreachable column: any feasible value
        } else {
          d = 1.0 / static_cast<double>(j.size_a());
        }
        table[j.index(c, a, b)] = d;
      }
    }
  }
  return table;
}

DiscriminatorMi via_discriminator(const DiscreteJoint& j, const TableAscentOptions& options) {
  const auto m = marginals(j);
  DiscriminatorMi out;
  out.optimal_table = posterior_table(j, m);
  out.value = discriminator_objective(j, out.optimal_table);
  maximize_discriminator_table(j, options, &out.numeric_value);
  out.discrepancy = std::abs(out.value - out.numeric_value);
  return out;
}

}  // namespace

DiscreteJoint::DiscreteJoint(std::size_t size_a, std::size_t size_b, std::vector<double> pmf)
    : DiscreteJoint(1, size_a, size_b, std::move(pmf)) {}

DiscreteJoint::DiscreteJoint(std::size_t conditions, std::size_t size_a, std::size_t size_b, std::vector<double> pmf)
    : conditions_(conditions), size_a_(size_a), size_b_(size_b), pmf_(std::move(pmf)) {
  if (conditions_ == 0 || size_a_ == 0 || size_b_ == 0 || conditions_ > kMaxAlphabet || size_a_ > kMaxAlphabet ||
      size_b_ > kMaxAlphabet) {
    throw InvalidSpecError("DiscreteJoint: alphabet sizes must be in [1, 8]");
  }
  if (pmf_.size() != conditions_ * size_a_ * size_b_) throw InvalidSpecError("DiscreteJoint: table size mismatch");
  double total = 0.0;
  for (double p : pmf_) {
    if (!(p >= 0.0)) throw InvalidSpecError("DiscreteJoint: negative or NaN probability");
    total += p;
  }
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    throw InvalidSpecError("DiscreteJoint: probabilities do not sum to 1");
  }
}

DiscreteJoint random_joint(std::size_t conditions, std::size_t size_a, std::size_t size_b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> draw(1.0);
  std::vector<double> pmf(conditions * size_a * size_b);
  double total = 0.0;
  for (double& p : pmf) {
    p = draw(rng);
    total += p;
  }
  for (double& p : pmf) p /= total;
  return DiscreteJoint(conditions, size_a, size_b, std::move(pmf));
}

double mi_exact(const DiscreteJoint& j) {
  if (j.conditions() != 1) throw InvalidSpecError("mi_exact: joint has a conditioning axis; use cmi_exact");
  return cmi_exact(j);
}

double cmi_exact(const DiscreteJoint& j) {
  const auto m = marginals(j);
  double total = 0.0;
  for (std::size_t c = 0; c < j.conditions(); ++c) {
    for (std::size_t a = 0; a < j.size_a(); ++a) {
      for (std::size_t b = 0; b < j.size_b(); ++b) {
        const double p = j(c, a, b);
        if (p <= 0.0) continue;
        total += p * std::log(p * m.c[c] / (m.ca[c * j.size_a() + a] * m.cb[c * j.size_b() + b]));
      }
    }
  }
  return std::max(total, 0.0);
}

double discriminator_objective(const DiscreteJoint& j, std::span<const double> table) {
  if (table.size() != j.pmf().size()) throw DimensionError("discriminator_objective: table size mismatch");
  double value = 0.0;
  for (std::size_t k = 0; k < table.size(); ++k) {
    const double p = j.pmf()[k];
    if (p > 0.0 && table[k] <= 0.0) return -std::numeric_limits<double>::infinity();
    value += xlogy(p, table[k]);
  }
  return value + conditional_entropy_a(j, marginals(j));
}

std::vector<double> maximize_discriminator_table(const DiscreteJoint& j, const TableAscentOptions& options,
                                                 double* value_out) {
  const auto m = marginals(j);
  const std::size_t na = j.size_a();
  std::vector<double> logits(j.pmf().size(), 0.0);
  std::vector<double> table(j.pmf().size(), 1.0 / static_cast<double>(na));
  std::vector<double> column(na);

  auto refresh_column = [&](std::size_t c, std::size_t b) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < na; ++a) peak = std::max(peak, logits[j.index(c, a, b)]);
    double total = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      column[a] = std::exp(logits[j.index(c, a, b)] - peak);
      total += column[a];
    }
    for (std::size_t a = 0; a < na; ++a) table[j.index(c, a, b)] = column[a] / total;
  };

  // Each (c, b) column is an independent simplex block. The ascent direction
  // is the logit gradient divided by the column mass P(c, b), which keeps the
  // step size meaningful for rare columns.
  for (std::size_t c = 0; c < j.conditions(); ++c) {
    for (std::size_t b = 0; b < j.size_b(); ++b) {
      const double pcb = m.cb[c * j.size_b() + b];
      if (pcb <= 0.0) continue;
      for (std::size_t step = 0; step < options.steps; ++step) {
        for (std::size_t a = 0; a < na; ++a) {
          const std::size_t k = j.index(c, a, b);
          logits[k] += options.step_size * (j.pmf()[k] / pcb - table[k]);
        }
        refresh_column(c, b);
      }
    }
  }
  if (value_out != nullptr) *value_out = discriminator_objective(j, table);
  return table;
}

DiscriminatorMi mi_via_discriminator(const DiscreteJoint& j, const TableAscentOptions& options) {
  if (j.conditions() != 1) throw InvalidSpecError("mi_via_discriminator: joint has a conditioning axis");
  return via_discriminator(j, options);
}

DiscriminatorMi cmi_via_discriminator(const DiscreteJoint& j, const TableAscentOptions& options) {
  return via_discriminator(j, options);
}

}  // namespace frtrain::adversaries
