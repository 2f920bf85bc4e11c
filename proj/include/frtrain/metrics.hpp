#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace frtrain::metrics {

// counts[y][yhat]
using Confusion = std::array<std::array<std::size_t, 2>, 2>;

struct MetricsReport {
  double accuracy = 0.0;
  double disparate_impact = 0.0;
  std::map<int, double> equalized_odds;  // strata with a missing group are absent
  std::optional<double> equal_opportunity;
  std::vector<Confusion> group_confusion;  // indexed by z
  double entropy_z = 0.0;                  // nats
};

double accuracy(std::span<const int> predictions, std::span<const int> labels);

// Min ratio of groupwise positive-prediction rates over all group pairs.
// Both rates zero counts as 1, exactly one zero as 0. Throws
// UndefinedGroupError when a group in [0, z_cardinality) has no examples.
double disparate_impact(std::span<const int> predictions, std::span<const int> z, int z_cardinality = 2);

// Per true label, the disparate-impact ratio restricted to that stratum.
std::map<int, double> equalized_odds(std::span<const int> predictions, std::span<const int> z,
                                     std::span<const int> labels, int z_cardinality = 2);
std::optional<double> equal_opportunity(std::span<const int> predictions, std::span<const int> z,
                                        std::span<const int> labels, int z_cardinality = 2);

std::vector<Confusion> confusion_by_group(std::span<const int> predictions, std::span<const int> labels,
                                          std::span<const int> z, int z_cardinality = 2);

// -sum p log p over the empirical code distribution, nats.
double empirical_entropy(std::span<const int> codes);

MetricsReport make_report(std::span<const int> predictions, std::span<const int> labels, std::span<const int> z,
                          int z_cardinality = 2);

std::string report_to_json(const MetricsReport& report);

}  // namespace frtrain::metrics
