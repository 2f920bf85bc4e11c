#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "frtrain/error.hpp"
#include "frtrain/harness.hpp"
#include "gtest/gtest.h"

namespace frtrain::harness {
namespace {

ExperimentSpec small_spec() {
  ExperimentSpec s;
  s.data.synthetic.n = 200;
  s.data.test_size = 200;
  s.train.epochs = 20;
  s.train.pretrain_epochs = 5;
  s.train.lambda2 = 0.1;
  s.poison = poison::PoisonSpec{};
  return s;
}

RunRow row(double grid, double lambda1, double acc, double di, std::string hash = "h", bool ok = true) {
  RunRow r;
  r.grid_value = grid;
  r.lambda1 = lambda1;
  r.acc = acc;
  r.di = di;
  r.config_hash = std::move(hash);
  r.ok = ok;
  return r;
}

TEST(ErrorRange, Examples) {
  const auto r = error_range(std::vector<double>{1, 2, 3});
  EXPECT_DOUBLE_EQ(r.mean, 2.0);
  EXPECT_DOUBLE_EQ(r.std, 1.0);
  EXPECT_EQ(r.formatted, "2.000 ± 0.500");
  EXPECT_EQ(error_range(std::vector<double>{0.7, 0.7, 0.7, 0.7}).formatted, "0.700 ± 0.000");
  EXPECT_THROW(error_range(std::vector<double>{1.0}), InvalidSpecError);
  EXPECT_THROW(error_range(std::vector<double>{}), InvalidSpecError);
}

TEST(ErrorRange, AgreesWithTwoPassAlternative) {
  // Welford's single-pass recurrence as the second implementation.
  const std::vector<double> values{0.781, 0.812, 0.797, 0.774, 0.806, 0.823, 0.791, 0.768, 0.799, 0.802};
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double delta = values[k] - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (values[k] - mean);
  }
  const auto r = error_range(values);
  EXPECT_NEAR(r.mean, mean, 1e-14);
  EXPECT_NEAR(r.std, std::sqrt(m2 / 9.0), 1e-14);
}

TEST(Aggregate, GroupsByGridPointOverSuccesses) {
  std::vector<RunRow> runs{row(0.1, 0.1, 0.8, 0.5), row(0.1, 0.1, 0.9, 0.7), row(0.1, 0.1, 0.0, 0.0, "h", false),
                           row(0.3, 0.3, 0.7, 0.9)};
  const auto agg = aggregate(runs);
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[0].runs, 2u);
  EXPECT_EQ(agg[0].failures, 1u);
  EXPECT_NEAR(agg[0].acc_mean, 0.85, 1e-15);
  EXPECT_NEAR(agg[0].di_mean, 0.6, 1e-15);
  ASSERT_TRUE(agg[0].acc.has_value());
  EXPECT_FALSE(agg[1].acc.has_value());
  runs.push_back(row(0.3, 0.3, 0.7, 0.9, "other"));
  EXPECT_THROW(aggregate(runs), InvalidSpecError);
}

TEST(Tradeoff, SortedByLambdaOne) {
  const std::vector<RunRow> runs{row(0.8, 0.8, 0.70, 0.95), row(0.0, 0.0, 0.88, 0.40), row(0.4, 0.4, 0.80, 0.70),
                                 row(0.0, 0.0, 0.86, 0.42)};
  const auto curve = emit_tradeoff_curve(runs);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_EQ(curve[0].lambda1, 0.0);
  EXPECT_NEAR(curve[0].acc, 0.87, 1e-15);
  EXPECT_EQ(curve[1].lambda1, 0.4);
  EXPECT_EQ(curve[2].lambda1, 0.8);
  EXPECT_EQ(emit_tradeoff_curve(std::vector<RunRow>{row(0.5, 0.5, 0.8, 0.8)}).size(), 1u);
  std::ostringstream out;
  write_tradeoff_csv(curve, out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "lambda1,acc,di");
}

TEST(RunExperiment, GridTimesSeedsRows) {
  auto s = small_spec();
  s.axis = SweepAxis::lambda1;
  s.grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  s.seeds = {0, 1, 2};
  const auto report = run_experiment(s, 2);
  ASSERT_EQ(report.runs.size(), 18u);
  EXPECT_EQ(report.aggregates.size(), 6u);
  EXPECT_TRUE(report.all_ok());
  for (std::size_t k = 0; k < 18; ++k) {
    EXPECT_EQ(report.runs[k].grid_value, s.grid[k / 3]);
    EXPECT_EQ(report.runs[k].lambda1, s.grid[k / 3]);
    EXPECT_EQ(report.runs[k].seed, s.seeds[k % 3]);
  }
  EXPECT_NE(report.runs[0].config_hash, report.runs[3].config_hash);
  EXPECT_EQ(report.runs[0].config_hash, report.runs[1].config_hash);
  // Aggregates are exact functions of their rows.
  for (std::size_t g = 0; g < 6; ++g) {
    const double mean = (report.runs[3 * g].acc + report.runs[3 * g + 1].acc + report.runs[3 * g + 2].acc) / 3.0;
    EXPECT_NEAR(report.aggregates[g].acc_mean, mean, 1e-15);
  }
}

TEST(RunExperiment, ByteReproducibleAcrossJobCounts) {
  auto s = small_spec();
  s.axis = SweepAxis::poison_fraction;
  s.grid = {0.1, 0.2};
  s.seeds = {3, 4};
  std::ostringstream a, b;
  write_runs_csv(run_experiment(s, 1).runs, a, false);
  write_runs_csv(run_experiment(s, 3).runs, b, false);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "lambda1,lambda2,seed,acc,di,eo0,eo1,eopp,runtime_s,grid,config_hash,status");
}

TEST(RunExperiment, FailuresAreRecordedPerRow) {
  auto s = small_spec();
  s.axis = SweepAxis::poison_fraction;
  s.grid = {0.1, 0.95};  // the second budget exceeds the target group
  const auto report = run_experiment(s);
  ASSERT_EQ(report.runs.size(), 2u);
  EXPECT_TRUE(report.runs[0].ok);
  EXPECT_FALSE(report.runs[1].ok);
  EXPECT_FALSE(report.all_ok());
  EXPECT_EQ(report.aggregates.size(), 2u);
  EXPECT_EQ(report.aggregates[1].failures, 1u);
}

TEST(PrepareData, PoisonsOnlyTheTrainingPart) {
  auto s = small_spec();
  s.split.val = 0.1;
  const auto d = prepare_data(s, 0.0, 7);
  EXPECT_EQ(d.train.size(), 200u);
  EXPECT_EQ(d.val.size(), 20u);
  EXPECT_EQ(d.test.size(), 200u);
  EXPECT_EQ(d.flipped.size(), 20u);
  EXPECT_TRUE(d.val.poisoned_indices().empty());
  s.axis = SweepAxis::val_size;
  s.grid = {0.05};
  EXPECT_EQ(prepare_data(s, 0.05, 7).val.size(), 10u);
}

TEST(PrepareData, CsvSourcesAreSplit) {
  const auto dir = std::filesystem::temp_directory_path() / "frtrain_harness_csv";
  std::filesystem::create_directories(dir);
  SyntheticSpec syn;
  syn.n = 100;
  save_csv(generate_synthetic(syn, 1), (dir / "all.csv").string());
  auto s = small_spec();
  s.data.kind = "csv";
  s.data.path = (dir / "all.csv").string();
  s.poison.reset();
  const auto d = prepare_data(s, 0.0, 1);
  EXPECT_EQ(d.train.size() + d.val.size() + d.test.size(), 100u);
  EXPECT_EQ(d.val.size(), 10u);
}

TEST(Spec, JsonRoundTripAndValidation) {
  auto s = small_spec();
  s.axis = SweepAxis::val_size;
  s.grid = {0.1, 0.05, 0.001};
  s.seeds = {1, 2, 3};
  s.lambda_search.enabled = true;
  const auto j = spec_to_json(s);
  EXPECT_EQ(spec_to_json(spec_from_json(j)), j);
  auto bad = j;
  bad["unexpected"] = 1;
  EXPECT_THROW(spec_from_json(bad), ConfigError);
  s.seeds.clear();
  EXPECT_THROW(s.validate(), Error);
  s.seeds = {0};
  s.grid.clear();
  EXPECT_THROW(s.validate(), Error);
  EXPECT_EQ(config_hash(j).size(), 16u);
  EXPECT_EQ(config_hash(j), config_hash(spec_to_json(spec_from_json(j))));
}

TEST(Report, WritesFiles) {
  auto s = small_spec();
  s.axis = SweepAxis::lambda1;
  s.grid = {0.0, 0.3};
  s.seeds = {0, 1};
  const auto dir = std::filesystem::temp_directory_path() / "frtrain_harness_report";
  std::filesystem::remove_all(dir);
  write_report(run_experiment(s), s, dir.string());
  for (const char* name : {"runs.csv", "aggregate.csv", "tradeoff.csv"}) EXPECT_TRUE(std::filesystem::exists(dir / name));
  std::ifstream in(dir / "runs.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("lambda1,lambda2,seed,acc,di,eo0,eo1,eopp,runtime_s", 0), 0u);
}

}  // namespace
}  // namespace frtrain::harness
