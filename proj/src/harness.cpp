#include "frtrain/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "frtrain/error.hpp"
#include "frtrain/metrics.hpp"
#include "frtrain/seed.hpp"

namespace frtrain::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, v] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string num(double v) { return std::isfinite(v) ? fmt("%.6f", v) : std::string("nan"); }

double finite_mean(const std::vector<double>& values) {
  double total = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    if (std::isfinite(v)) {
      total += v;
      ++n;
    }
  }
  return n == 0 ? kNaN : total / static_cast<double>(n);
}

std::size_t val_count(std::size_t train_size, double fraction) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train_size))));
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

SweepAxis axis_from_string(const std::string& s) {
  if (s == "none") return SweepAxis::none;
  if (s == "lambda1") return SweepAxis::lambda1;
  if (s == "poison_fraction") return SweepAxis::poison_fraction;
  if (s == "val_size") return SweepAxis::val_size;
  throw ConfigError("unknown sweep axis '" + s + "'");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::none:
      return "none";
    case SweepAxis::lambda1:
      return "lambda1";
    case SweepAxis::poison_fraction:
      return "poison_fraction";
    case SweepAxis::val_size:
      return "val_size";
  }
  return "none";
}

SyntheticSpec synthetic_from_json(const nlohmann::json& j, SyntheticSpec s) {
  reject_unknown(j, {"n", "mean_neg", "cov_neg", "mean_pos", "cov_pos", "rotation_angle", "label_prior"},
                 "synthetic spec");
  read_if(j, "n", s.n);
  read_if(j, "mean_neg", s.mean_neg);
  read_if(j, "cov_neg", s.cov_neg);
  read_if(j, "mean_pos", s.mean_pos);
  read_if(j, "cov_pos", s.cov_pos);
  read_if(j, "rotation_angle", s.rotation_angle);
  read_if(j, "label_prior", s.label_prior);
  s.validate();
  return s;
}

nlohmann::json synthetic_to_json(const SyntheticSpec& s) {
  return {{"n", s.n},
          {"mean_neg", s.mean_neg},
          {"cov_neg", s.cov_neg},
          {"mean_pos", s.mean_pos},
          {"cov_pos", s.cov_pos},
          {"rotation_angle", s.rotation_angle},
          {"label_prior", s.label_prior}};
}

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw InvalidSpecError("experiment needs at least one seed");
  if (axis != SweepAxis::none && grid.empty()) throw InvalidSpecError("sweep axis given with an empty grid");
  if (data.kind != "synthetic" && data.kind != "csv") throw InvalidSpecError("unknown data source '" + data.kind + "'");
  if (data.kind == "csv" && data.path.empty() && (data.train_path.empty() || data.test_path.empty())) {
    throw InvalidSpecError("csv source needs `path` or both `train` and `test`");
  }
  if (data.kind == "synthetic") data.synthetic.validate();
  if (poison) poison->validate();
  for (double g : grid) {
    if (!std::isfinite(g)) throw InvalidSpecError("grid values must be finite");
    if (axis == SweepAxis::val_size && !(g > 0.0 && g <= 1.0)) throw InvalidSpecError("val_size grid must be in (0, 1]");
  }
  train.validate();
}

std::vector<double> ExperimentSpec::points() const { return axis == SweepAxis::none ? std::vector<double>{0.0} : grid; }

nlohmann::json spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json data{{"source", spec.data.kind}};
  if (spec.data.kind == "synthetic") {
    data["synthetic"] = synthetic_to_json(spec.data.synthetic);
    data["test_size"] = spec.data.test_size;
  } else {
    if (!spec.data.path.empty()) data["path"] = spec.data.path;
    if (!spec.data.train_path.empty()) data["train"] = spec.data.train_path;
    if (!spec.data.val_path.empty()) data["val"] = spec.data.val_path;
    if (!spec.data.test_path.empty()) data["test"] = spec.data.test_path;
    data["schema"] = {{"features", spec.data.schema.feature_columns},
                      {"sensitive", spec.data.schema.sensitive_column},
                      {"label", spec.data.schema.label_column},
                      {"weight", spec.data.schema.weight_column},
                      {"z_cardinality", spec.data.schema.z_cardinality}};
  }
  nlohmann::json j{{"data", data},
                   {"split", {{"train", spec.split.train}, {"val", spec.split.val}, {"test", spec.split.test}}},
                   {"train", trainer::config_to_json(spec.train)},
                   {"model", spec.model == ModelKind::frtrain ? "frtrain" : "logistic"},
                   {"sweep", {{"axis", to_string(spec.axis)}, {"grid", spec.grid}}},
                   {"seeds", spec.seeds}};
  if (spec.poison) {
    j["poison"] = {{"target_group", spec.poison->target_group},
                   {"fraction", spec.poison->fraction},
                   {"strategy", poison::to_string(spec.poison->strategy)},
                   {"seed", spec.poison->seed}};
  }
  if (spec.lambda_search.enabled) {
    j["lambda_search"] = {{"grid", spec.lambda_search.options.grid},
                          {"target_di", spec.lambda_search.options.target_di},
                          {"holdout_fraction", spec.lambda_search.options.holdout_fraction}};
  }
  return j;
}

ExperimentSpec spec_from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  try {
    reject_unknown(j, {"data", "poison", "split", "train", "model", "lambda_search", "sweep", "seeds"}, "experiment");
    if (j.contains("data")) {
      const auto& d = j.at("data");
      reject_unknown(d, {"source", "synthetic", "test_size", "path", "train", "val", "test", "schema"}, "data");
      read_if(d, "source", spec.data.kind);
      if (d.contains("synthetic")) spec.data.synthetic = synthetic_from_json(d.at("synthetic"));
      read_if(d, "test_size", spec.data.test_size);
      read_if(d, "path", spec.data.path);
      read_if(d, "train", spec.data.train_path);
      read_if(d, "val", spec.data.val_path);
      read_if(d, "test", spec.data.test_path);
      if (d.contains("schema")) {
        const auto& s = d.at("schema");
        reject_unknown(s, {"features", "sensitive", "label", "weight", "z_cardinality"}, "schema");
        read_if(s, "features", spec.data.schema.feature_columns);
        read_if(s, "sensitive", spec.data.schema.sensitive_column);
        read_if(s, "label", spec.data.schema.label_column);
        read_if(s, "weight", spec.data.schema.weight_column);
        read_if(s, "z_cardinality", spec.data.schema.z_cardinality);
      }
    }
    if (j.contains("poison") && !j.at("poison").is_null()) {
      const auto& p = j.at("poison");
      reject_unknown(p, {"target_group", "fraction", "strategy", "seed"}, "poison");
      poison::PoisonSpec ps;
      read_if(p, "target_group", ps.target_group);
      read_if(p, "fraction", ps.fraction);
      if (p.contains("strategy")) ps.strategy = poison::strategy_from_string(p.at("strategy").get<std::string>());
      read_if(p, "seed", ps.seed);
      spec.poison = ps;
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      reject_unknown(s, {"train", "val", "test"}, "split");
      read_if(s, "train", spec.split.train);
      read_if(s, "val", spec.split.val);
      read_if(s, "test", spec.split.test);
    }
    if (j.contains("train")) spec.train = trainer::config_from_json(j.at("train"));
    if (j.contains("model")) {
      const auto m = j.at("model").get<std::string>();
      if (m != "frtrain" && m != "logistic") throw ConfigError("unknown model '" + m + "'");
      spec.model = m == "frtrain" ? ModelKind::frtrain : ModelKind::logistic;
    }
    if (j.contains("lambda_search") && !j.at("lambda_search").is_null()) {
      const auto& l = j.at("lambda_search");
      reject_unknown(l, {"grid", "target_di", "holdout_fraction"}, "lambda_search");
      spec.lambda_search.enabled = true;
      read_if(l, "grid", spec.lambda_search.options.grid);
      read_if(l, "target_di", spec.lambda_search.options.target_di);
      read_if(l, "holdout_fraction", spec.lambda_search.options.holdout_fraction);
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      reject_unknown(s, {"axis", "grid"}, "sweep");
      if (s.contains("axis")) spec.axis = axis_from_string(s.at("axis").get<std::string>());
      read_if(s, "grid", spec.grid);
    }
    read_if(j, "seeds", spec.seeds);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read experiment spec " + path);
  try {
    return spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

PreparedData prepare_data(const ExperimentSpec& spec, double grid_value, std::uint64_t seed) {
  double val_fraction = spec.split.val;
  if (spec.axis == SweepAxis::val_size) val_fraction = grid_value;

  PreparedData out;
  if (spec.data.kind == "synthetic") {
    SyntheticSpec s = spec.data.synthetic;
    out.train = generate_synthetic(s, derive_seed(seed, 100));
    s.n = val_count(out.train.size(), val_fraction);
    out.val = generate_synthetic(s, derive_seed(seed, 101));
    s.n = spec.data.test_size;
    out.test = generate_synthetic(s, derive_seed(seed, 102));
  } else if (!spec.data.path.empty()) {
    const auto all = load_csv(spec.data.path, spec.data.schema);
    SplitFractions f = spec.split;
    f.val = val_fraction;
    f.train = 1.0 - f.val - f.test;
    auto parts = split(all, f, derive_seed(seed, 100));
    out.train = std::move(parts.train);
    out.val = std::move(parts.val);
    out.test = std::move(parts.test);
  } else {
    CsvSchema schema = spec.data.schema;
    out.train = load_csv(spec.data.train_path, schema);
    if (schema.z_cardinality == 0) schema.z_cardinality = out.train.z_cardinality();
    out.test = load_csv(spec.data.test_path, schema);
    if (!spec.data.val_path.empty()) {
      auto val = load_csv(spec.data.val_path, schema);
      if (spec.axis == SweepAxis::val_size) {
        std::vector<std::size_t> rows(std::min(val.size(), val_count(out.train.size(), val_fraction)));
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        val = val.subset(rows);
      }
      out.val = std::move(val);
    }
  }

  std::optional<poison::PoisonSpec> ps = spec.poison;
  if (spec.axis == SweepAxis::poison_fraction) {
    if (!ps) ps = poison::PoisonSpec{};
    ps->fraction = grid_value;
  }
  if (ps && ps->fraction > 0.0) {
    ps->seed = derive_seed(seed, 104 + ps->seed);
    auto poisoned = poison::flip_labels(out.train, *ps);
    out.train = std::move(poisoned.data);
    out.flipped = std::move(poisoned.flipped);
  }
  return out;
}

RunRow run_single(const ExperimentSpec& spec, double grid_value, std::uint64_t seed) {
  RunRow row;
  row.grid_value = grid_value;
  row.seed = seed;
  trainer::TrainConfig cfg = spec.train;
  cfg.seed = seed;
  if (spec.axis == SweepAxis::lambda1) cfg.lambda1 = grid_value;
  row.lambda1 = cfg.lambda1;
  row.lambda2 = cfg.lambda2;

  auto hashed = spec_to_json(spec);
  hashed.erase("seeds");
  hashed["sweep"].erase("grid");
  hashed["sweep"]["value"] = grid_value;
  row.config_hash = config_hash(hashed);
  row.acc = row.di = row.eo0 = row.eo1 = row.eopp = kNaN;

  const auto start = std::chrono::steady_clock::now();
  try {
    const auto data = prepare_data(spec, grid_value, seed);
    nnet::MLPModel model;
    if (spec.model == ModelKind::logistic) {
      model = trainer::train_logistic_baseline(data.train, cfg);
    } else {
      if (spec.lambda_search.enabled && spec.axis != SweepAxis::lambda1) {
        cfg.lambda1 = trainer::select_lambda1(data.train, data.val, cfg, spec.lambda_search.options).lambda1;
        row.lambda1 = cfg.lambda1;
      }
      model = trainer::train_frtrain(data.train, data.val, cfg).generator;
    }
    const auto decisions = trainer::decide(trainer::predict(model, data.test));
    const auto labels = data.test.labels();
    const auto z = data.test.sensitive();
    const int zc = data.test.z_cardinality();
    row.acc = metrics::accuracy(decisions, labels);
    try {
      row.di = metrics::disparate_impact(decisions, z, zc);
    } catch (const UndefinedGroupError&) {
      row.di = kNaN;
    }
    const auto eo = metrics::equalized_odds(decisions, z, labels, zc);
    if (eo.count(0) != 0) row.eo0 = eo.at(0);
    if (eo.count(1) != 0) row.eo1 = eo.at(1);
    if (const auto eopp = metrics::equal_opportunity(decisions, z, labels, zc)) row.eopp = *eopp;
    row.ok = true;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

ExperimentReport run_experiment(const ExperimentSpec& spec, int jobs) {
  spec.validate();
  const auto points = spec.points();
  const std::size_t n_seeds = spec.seeds.size();
  const std::size_t n_tasks = points.size() * n_seeds;
  ExperimentReport report;
  report.runs.resize(n_tasks);
  const int threads = std::max(1, jobs);
  // Each task writes only its own slot, so the row order is fixed by (point, seed).
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long t = 0; t < static_cast<long>(n_tasks); ++t) {
    const auto k = static_cast<std::size_t>(t);
    report.runs[k] = run_single(spec, points[k / n_seeds], spec.seeds[k % n_seeds]);
  }
  report.aggregates = aggregate(report.runs);
  return report;
}

bool ExperimentReport::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunRow& r) { return r.ok; });
}

ErrorRange error_range(std::span<const double> values) {
  if (values.size() < 2) throw InvalidSpecError("error_range needs at least two values");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  ErrorRange r;
  r.mean = mean;
  r.std = std::sqrt(ss / (n - 1.0));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f ± %.3f", r.mean, r.std / 2.0);
  r.formatted = buf;
  return r;
}

std::vector<AggregateRow> aggregate(std::span<const RunRow> runs) {
  std::vector<double> order;
  std::map<double, std::vector<const RunRow*>> groups;
  for (const auto& r : runs) {
    if (groups.find(r.grid_value) == groups.end()) order.push_back(r.grid_value);
    groups[r.grid_value].push_back(&r);
  }
  std::vector<AggregateRow> out;
  for (double g : order) {
    const auto& rows = groups[g];
    AggregateRow a;
    a.grid_value = g;
    a.config_hash = rows.front()->config_hash;
    std::vector<double> acc, di, eo0, eo1, eopp, l1;
    for (const auto* r : rows) {
      if (r->config_hash != a.config_hash) {
        throw InvalidSpecError("grid point " + num(g) + " mixes config hashes");
      }
      if (!r->ok) {
        ++a.failures;
        continue;
      }
      ++a.runs;
      acc.push_back(r->acc);
      di.push_back(r->di);
      eo0.push_back(r->eo0);
      eo1.push_back(r->eo1);
      eopp.push_back(r->eopp);
      l1.push_back(r->lambda1);
      a.lambda2 = r->lambda2;
    }
    a.acc_mean = finite_mean(acc);
    a.di_mean = finite_mean(di);
    a.eo0_mean = finite_mean(eo0);
    a.eo1_mean = finite_mean(eo1);
    a.eopp_mean = finite_mean(eopp);
    a.lambda1_mean = finite_mean(l1);
    const bool di_finite = std::all_of(di.begin(), di.end(), [](double v) { return std::isfinite(v); });
    if (acc.size() >= 2) a.acc = error_range(acc);
    if (di.size() >= 2 && di_finite) a.di = error_range(di);
    out.push_back(a);
  }
  return out;
}

std::vector<TradeoffPoint> emit_tradeoff_curve(std::span<const RunRow> runs) {
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : runs) {
    if (!r.ok) continue;
    groups[r.lambda1].first.push_back(r.acc);
    groups[r.lambda1].second.push_back(r.di);
  }
  std::vector<TradeoffPoint> out;
  for (const auto& [l1, v] : groups) out.push_back({l1, finite_mean(v.first), finite_mean(v.second)});
  return out;
}

void write_runs_csv(std::span<const RunRow> runs, std::ostream& out, bool with_runtime) {
  out << "lambda1,lambda2,seed,acc,di,eo0,eo1,eopp,runtime_s,grid,config_hash,status\n";
  for (const auto& r : runs) {
    out << num(r.lambda1) << ',' << num(r.lambda2) << ',' << r.seed << ',' << num(r.acc) << ',' << num(r.di) << ','
        << num(r.eo0) << ',' << num(r.eo1) << ',' << num(r.eopp) << ',' << (with_runtime ? fmt("%.3f", r.runtime_s) : "")
        << ',' << num(r.grid_value) << ',' << r.config_hash << ',' << (r.ok ? "ok" : "error: " + sanitize(r.error))
        << '\n';
  }
}

void write_aggregate_csv(std::span<const AggregateRow> rows, std::ostream& out) {
  out << "grid,runs,failures,config_hash,lambda1_mean,lambda2,acc_mean,acc_std,acc_range,di_mean,di_std,di_range,"
         "eo0_mean,eo1_mean,eopp_mean\n";
  for (const auto& a : rows) {
    out << num(a.grid_value) << ',' << a.runs << ',' << a.failures << ',' << a.config_hash << ','
        << num(a.lambda1_mean) << ',' << num(a.lambda2) << ',' << num(a.acc_mean) << ','
        << (a.acc ? num(a.acc->std) : "") << ',' << (a.acc ? a.acc->formatted : "") << ',' << num(a.di_mean) << ','
        << (a.di ? num(a.di->std) : "") << ',' << (a.di ? a.di->formatted : "") << ',' << num(a.eo0_mean) << ','
        << num(a.eo1_mean) << ',' << num(a.eopp_mean) << '\n';
  }
}

void write_tradeoff_csv(std::span<const TradeoffPoint> points, std::ostream& out) {
  out << "lambda1,acc,di\n";
  for (const auto& p : points) out << num(p.lambda1) << ',' << num(p.acc) << ',' << num(p.di) << '\n';
}

void write_report(const ExperimentReport& report, const ExperimentSpec& spec, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(std::filesystem::path(dir) / name);
    if (!f) throw Error("cannot write " + (std::filesystem::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("runs.csv");
    write_runs_csv(report.runs, f);
  }
  {
    auto f = open("aggregate.csv");
    write_aggregate_csv(report.aggregates, f);
  }
  if (spec.axis == SweepAxis::lambda1 || spec.lambda_search.enabled) {
    auto f = open("tradeoff.csv");
    const auto curve = emit_tradeoff_curve(report.runs);
    write_tradeoff_csv(curve, f);
  }
}

std::string config_hash(const nlohmann::json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace frtrain::harness
