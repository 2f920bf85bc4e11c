#include "frtrain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "frtrain/error.hpp"
#include "json.hpp"

namespace frtrain::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw DimensionError("metrics: input lengths differ");
  if (a == 0) throw InvalidSpecError("metrics: empty input");
}

// Positive-rate ratio over groups; nullopt when a group has no members.
std::optional<double> min_rate_ratio(std::span<const int> predictions, std::span<const int> z, int z_cardinality,
                                     std::span<const int> labels = {}, int stratum = -1) {
  std::vector<std::size_t> members(static_cast<std::size_t>(z_cardinality), 0);
  std::vector<std::size_t> positives(static_cast<std::size_t>(z_cardinality), 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (stratum >= 0 && labels[i] != stratum) continue;
    if (z[i] < 0 || z[i] >= z_cardinality) throw UndefinedGroupError("metrics: sensitive code out of range");
    ++members[static_cast<std::size_t>(z[i])];
    positives[static_cast<std::size_t>(z[i])] += predictions[i] == 1 ? 1 : 0;
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t g = 0; g < members.size(); ++g) {
    if (members[g] == 0) return std::nullopt;
    const double rate = static_cast<double>(positives[g]) / static_cast<double>(members[g]);
    lo = std::min(lo, rate);
    hi = std::max(hi, rate);
  }
  if (hi == 0.0) return 1.0;
  return lo / hi;
}

}  // namespace

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_lengths(predictions.size(), labels.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double disparate_impact(std::span<const int> predictions, std::span<const int> z, int z_cardinality) {
  check_lengths(predictions.size(), z.size());
  const auto ratio = min_rate_ratio(predictions, z, z_cardinality);
  if (!ratio) throw UndefinedGroupError("disparate_impact: a sensitive group has no examples");
  return *ratio;
}

std::map<int, double> equalized_odds(std::span<const int> predictions, std::span<const int> z,
                                     std::span<const int> labels, int z_cardinality) {
  check_lengths(predictions.size(), z.size());
  check_lengths(predictions.size(), labels.size());
  std::map<int, double> out;
  for (int y : {0, 1}) {
    if (auto r = min_rate_ratio(predictions, z, z_cardinality, labels, y)) out[y] = *r;
  }
  return out;
}

std::optional<double> equal_opportunity(std::span<const int> predictions, std::span<const int> z,
                                        std::span<const int> labels, int z_cardinality) {
  const auto eo = equalized_odds(predictions, z, labels, z_cardinality);
  const auto it = eo.find(1);
  if (it == eo.end()) return std::nullopt;
  return it->second;
}

std::vector<Confusion> confusion_by_group(std::span<const int> predictions, std::span<const int> labels,
                                          std::span<const int> z, int z_cardinality) {
  check_lengths(predictions.size(), labels.size());
  check_lengths(predictions.size(), z.size());
  std::vector<Confusion> out(static_cast<std::size_t>(z_cardinality), Confusion{});
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (z[i] < 0 || z[i] >= z_cardinality) throw UndefinedGroupError("confusion_by_group: code out of range");
    ++out[static_cast<std::size_t>(z[i])][static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
  }
  return out;
}

double empirical_entropy(std::span<const int> codes) {
  if (codes.empty()) throw InvalidSpecError("empirical_entropy: empty input");
  std::map<int, std::size_t> counts;
  for (int c : codes) ++counts[c];
  double h = 0.0;
  const double n = static_cast<double>(codes.size());
  for (const auto& [code, count] : counts) {
    const double p = static_cast<double>(count) / n;
    h -= p * std::log(p);
  }
  return h;
}

MetricsReport make_report(std::span<const int> predictions, std::span<const int> labels, std::span<const int> z,
                          int z_cardinality) {
  MetricsReport r;
  r.accuracy = accuracy(predictions, labels);
  r.disparate_impact = disparate_impact(predictions, z, z_cardinality);
  r.equalized_odds = equalized_odds(predictions, z, labels, z_cardinality);
  if (auto it = r.equalized_odds.find(1); it != r.equalized_odds.end()) r.equal_opportunity = it->second;
  r.group_confusion = confusion_by_group(predictions, labels, z, z_cardinality);
  r.entropy_z = empirical_entropy(z);
  return r;
}

std::string report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["disparate_impact"] = r.disparate_impact;
  nlohmann::json eo = nlohmann::json::object();
  for (const auto& [y, v] : r.equalized_odds) eo[std::to_string(y)] = v;
  j["equalized_odds"] = eo;
  j["equal_opportunity"] = r.equal_opportunity ? nlohmann::json(*r.equal_opportunity) : nlohmann::json(nullptr);
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& c : r.group_confusion) {
    groups.push_back({{c[0][0], c[0][1]}, {c[1][0], c[1][1]}});
  }
  j["group_confusion"] = groups;
  j["entropy_z"] = r.entropy_z;
  return j.dump(2);
}

}  // namespace frtrain::metrics
