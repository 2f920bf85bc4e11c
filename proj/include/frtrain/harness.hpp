#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "frtrain/dataset.hpp"
#include "frtrain/poison.hpp"
#include "frtrain/trainer.hpp"
#include "json.hpp"

namespace frtrain::harness {

enum class SweepAxis { none, lambda1, poison_fraction, val_size };
enum class ModelKind { frtrain, logistic };

// Synthetic sources draw train, validation and test sets independently; the
// validation size is split.val * |train|. CSV sources either name one file
// that is split by `split`, or three files.
struct DataSource {
  std::string kind = "synthetic";  // synthetic | csv
  SyntheticSpec synthetic;
  std::size_t test_size = 2000;
  std::string path;
  std::string train_path;
  std::string val_path;
  std::string test_path;
  CsvSchema schema;
};

struct LambdaSearch {
  bool enabled = false;
  trainer::LambdaSelectionOptions options;
};

struct ExperimentSpec {
  DataSource data;
  std::optional<poison::PoisonSpec> poison;
  SplitFractions split{0.8, 0.1, 0.1};
  trainer::TrainConfig train;
  ModelKind model = ModelKind::frtrain;
  LambdaSearch lambda_search;
  SweepAxis axis = SweepAxis::none;
  std::vector<double> grid;
  std::vector<std::uint64_t> seeds{0};

  void validate() const;
  // The grid actually iterated: {0} when there is no sweep axis.
  std::vector<double> points() const;
};

nlohmann::json spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);
ExperimentSpec load_spec(const std::string& path);

SyntheticSpec synthetic_from_json(const nlohmann::json& j, SyntheticSpec base = {});
nlohmann::json synthetic_to_json(const SyntheticSpec& s);

SweepAxis axis_from_string(const std::string& s);
std::string to_string(SweepAxis axis);

struct PreparedData {
  Dataset train;  // possibly poisoned
  Dataset val;    // clean
  Dataset test;   // clean
  std::vector<std::size_t> flipped;
};

// generate or load, split, then poison the training part only.
PreparedData prepare_data(const ExperimentSpec& spec, double grid_value, std::uint64_t seed);

struct RunRow {
  double grid_value = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::uint64_t seed = 0;
  double acc = 0.0;
  double di = 0.0;
  double eo0 = 0.0;
  double eo1 = 0.0;
  double eopp = 0.0;
  double runtime_s = 0.0;
  std::string config_hash;
  bool ok = false;
  std::string error;
};

struct ErrorRange {
  double mean = 0.0;
  double std = 0.0;
  std::string formatted;  // "m ± s/2", three decimals
};

// Sample standard deviation (n - 1). Throws InvalidSpecError for fewer than two values.
ErrorRange error_range(std::span<const double> values);

struct AggregateRow {
  double grid_value = 0.0;
  std::size_t runs = 0;
  std::size_t failures = 0;
  std::string config_hash;
  double lambda1_mean = 0.0;
  double lambda2 = 0.0;
  std::optional<ErrorRange> acc;
  std::optional<ErrorRange> di;
  double acc_mean = 0.0;
  double di_mean = 0.0;
  double eo0_mean = 0.0;
  double eo1_mean = 0.0;
  double eopp_mean = 0.0;
};

struct ExperimentReport {
  std::vector<RunRow> runs;  // sorted by grid point, then seed order
  std::vector<AggregateRow> aggregates;

  bool all_ok() const;
};

RunRow run_single(const ExperimentSpec& spec, double grid_value, std::uint64_t seed);
// Runs every (grid point, seed) pair with at most `jobs` concurrent runs.
ExperimentReport run_experiment(const ExperimentSpec& spec, int jobs = 1);

// Groups successful rows by grid value. Throws InvalidSpecError when rows of
// one grid point carry different config hashes.
std::vector<AggregateRow> aggregate(std::span<const RunRow> runs);

struct TradeoffPoint {
  double lambda1 = 0.0;
  double acc = 0.0;
  double di = 0.0;
};

// Mean accuracy and DI per lambda1, ascending.
std::vector<TradeoffPoint> emit_tradeoff_curve(std::span<const RunRow> runs);

void write_runs_csv(std::span<const RunRow> runs, std::ostream& out, bool with_runtime = true);
void write_aggregate_csv(std::span<const AggregateRow> rows, std::ostream& out);
void write_tradeoff_csv(std::span<const TradeoffPoint> points, std::ostream& out);

// Writes runs.csv, aggregate.csv and (for lambda1 sweeps) tradeoff.csv.
void write_report(const ExperimentReport& report, const ExperimentSpec& spec, const std::string& dir);

// 64-bit FNV-1a of the compact JSON text, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

}  // namespace frtrain::harness
