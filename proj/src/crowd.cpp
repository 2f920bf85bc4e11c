#include <set>

#include "frtrain/dataset.hpp"
#include "frtrain/error.hpp"

namespace frtrain {

std::map<int, int> aggregate_crowd_labels(const std::vector<CrowdResponse>& responses, std::size_t n_max,
                                          double threshold) {
  if (n_max < 1) throw InvalidSpecError("aggregate_crowd_labels: n_max must be at least 1");
  struct Tally {
    std::size_t count = 0;
    double total = 0.0;
  };
  std::map<int, Tally> tallies;
  for (const auto& r : responses) {
    if (r.rating < 1 || r.rating > 4) throw InvalidSpecError("aggregate_crowd_labels: rating outside 1..4");
    auto& t = tallies[r.question_id];
    if (t.count == n_max) continue;
    ++t.count;
    t.total += r.rating;
  }
  std::map<int, int> labels;
  for (const auto& [question, t] : tallies) {
    labels[question] = t.total / static_cast<double>(t.count) >= threshold ? 1 : 0;
  }
  return labels;
}

std::vector<CrowdResponse> filter_workers(const std::vector<CrowdResponse>& responses,
                                          const std::map<int, int>& gold, double min_accuracy) {
  if (gold.empty()) throw InvalidSpecError("filter_workers: gold set is empty");
  std::map<int, std::pair<std::size_t, std::size_t>> score;  // worker -> (correct, answered)
  for (const auto& r : responses) {
    const auto it = gold.find(r.question_id);
    if (it == gold.end()) continue;
    const int answer = r.rating >= kCrowdThreshold ? 1 : 0;
    auto& s = score[r.worker_id];
    s.first += answer == it->second ? 1 : 0;
    ++s.second;
  }
  std::set<int> rejected;
  for (const auto& [worker, s] : score) {
    if (static_cast<double>(s.first) / static_cast<double>(s.second) < min_accuracy) rejected.insert(worker);
  }
  std::vector<CrowdResponse> kept;
  for (const auto& r : responses) {
    if (!rejected.contains(r.worker_id)) kept.push_back(r);
  }
  return kept;
}

}  // namespace frtrain
