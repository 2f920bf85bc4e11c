// Command-line front end. Every subcommand reads an optional JSON object via
// --config; flags given on the command line replace the matching keys.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "frtrain/adversaries.hpp"
#include "frtrain/dataset.hpp"
#include "frtrain/error.hpp"
#include "frtrain/harness.hpp"
#include "frtrain/metrics.hpp"
#include "frtrain/poison.hpp"
#include "frtrain/trainer.hpp"

using namespace frtrain;
using nlohmann::json;

namespace {

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": expected a JSON object");
  return j;
}

// Flag values that were given on the command line, keyed by config name.
class Overrides {
 public:
  template <typename T>
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto slot = std::make_shared<std::optional<T>>();
    app->add_option(flag, *slot, help);
    apply_.push_back([slot, key](json& j) {
      if (*slot) j[key] = **slot;
    });
  }
  void add_flag(CLI::App* app, const std::string& flag, const std::string& key, bool value, const std::string& help) {
    auto slot = std::make_shared<bool>(false);
    app->add_flag(flag, *slot, help);
    apply_.push_back([slot, key, value](json& j) {
      if (*slot) j[key] = value;
    });
  }
  json resolve(const std::string& config_path) const {
    json j = read_config(config_path);
    for (const auto& f : apply_) f(j);
    return j;
  }

 private:
  std::vector<std::function<void(json&)>> apply_;
};

std::string take_string(json& j, const char* key, const std::string& fallback = "") {
  if (!j.contains(key)) return fallback;
  auto v = j.at(key).get<std::string>();
  j.erase(key);
  return v;
}

template <typename T>
T take(json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  auto v = j.at(key).get<T>();
  j.erase(key);
  return v;
}

std::string require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing required setting '") + what + "'");
  return value;
}

void add_train_overrides(Overrides& o, CLI::App* app) {
  o.add<double>(app, "--lambda1", "lambda1", "fairness knob");
  o.add<double>(app, "--lambda2", "lambda2", "robustness knob");
  o.add<double>(app, "--C", "C", "re-weighting threshold");
  o.add<std::string>(app, "--criterion", "fairness_criterion", "DI, EO or EOPP");
  o.add<std::size_t>(app, "--epochs", "epochs", "total epochs");
  o.add<std::size_t>(app, "--pretrain-epochs", "pretrain_epochs", "generator-only epochs");
  o.add<std::size_t>(app, "--update-ratio", "update_ratio", "adversary steps per generator step");
  o.add<double>(app, "--generator-lr", "generator_lr", "Adam step size");
  o.add<double>(app, "--disc-lr", "disc_lr", "fairness adversary SGD step size");
  o.add<double>(app, "--robust-disc-lr", "robust_disc_lr", "robustness adversary SGD step size");
  o.add<std::uint64_t>(app, "--seed", "seed", "random seed");
  o.add_flag(app, "--no-reweight", "reweight", false, "disable example re-weighting");
}

int gen_synth(const json& cfg_in) {
  json cfg = cfg_in;
  const auto out = require(take_string(cfg, "out"), "out");
  const auto seed = take<std::uint64_t>(cfg, "seed", 0);
  const auto data = generate_synthetic(harness::synthetic_from_json(cfg), seed);
  save_csv(data, out);
  std::printf("wrote %zu examples to %s\n", data.size(), out.c_str());
  return 0;
}

int poison_cmd(const json& cfg_in) {
  json cfg = cfg_in;
  const auto in = require(take_string(cfg, "in"), "in");
  const auto out = require(take_string(cfg, "out"), "out");
  const auto flips_out = take_string(cfg, "flips_out");
  poison::PoisonSpec spec;
  spec.target_group = take<int>(cfg, "group", spec.target_group);
  spec.fraction = take<double>(cfg, "fraction", spec.fraction);
  spec.strategy = poison::strategy_from_string(take_string(cfg, "strategy", "degradation-surrogate"));
  spec.seed = take<std::uint64_t>(cfg, "seed", spec.seed);
  if (!cfg.empty()) throw ConfigError("unknown poison setting '" + cfg.begin().key() + "'");
  const auto data = load_csv(in);
  const auto result = poison::flip_labels(data, spec);
  save_csv(result.data, out);
  if (!flips_out.empty()) {
    std::ofstream f(flips_out);
    f << "index\n";
    for (auto i : result.flipped) f << i << '\n';
  }
  std::printf("flipped %zu of %zu labels in group %d\n", result.flipped.size(), data.size(), spec.target_group);
  return 0;
}

int train_cmd(const json& cfg_in) {
  json cfg = cfg_in;
  const auto train_path = require(take_string(cfg, "train"), "train");
  const auto val_path = take_string(cfg, "val");
  const auto test_path = take_string(cfg, "test");
  const auto model_out = take_string(cfg, "model_out");
  const auto history_out = take_string(cfg, "history_out");
  const auto metrics_out = take_string(cfg, "metrics_out");
  const bool baseline = take<bool>(cfg, "baseline", false);
  const auto tc = trainer::config_from_json(cfg);

  const auto train = load_csv(train_path);
  CsvSchema schema;
  schema.z_cardinality = train.z_cardinality();
  const Dataset val = val_path.empty() ? Dataset(train.feature_dim(), train.z_cardinality()) : load_csv(val_path, schema);

  nnet::MLPModel model;
  if (baseline) {
    model = trainer::train_logistic_baseline(train, tc);
  } else {
    auto result = trainer::train_frtrain(train, val, tc);
    model = std::move(result.generator);
    if (!history_out.empty()) trainer::write_history_csv(result.history, history_out);
  }
  if (!model_out.empty()) nnet::save_model(model, model_out);
  const auto report = trainer::evaluate(model, test_path.empty() ? train : load_csv(test_path, schema));
  const auto text = metrics::report_to_json(report);
  if (!metrics_out.empty()) std::ofstream(metrics_out) << text << '\n';
  std::printf("%s\n", text.c_str());
  return 0;
}

int sweep_cmd(const json& cfg_in) {
  json cfg = cfg_in;
  const auto out_dir = take_string(cfg, "out_dir", "report");
  const int jobs = take<int>(cfg, "jobs", 1);
  if (cfg.contains("lambda2_override")) {
    cfg["train"]["lambda2"] = cfg.at("lambda2_override");
    cfg.erase("lambda2_override");
  }
  if (cfg.contains("axis_override")) {
    cfg["sweep"]["axis"] = cfg.at("axis_override");
    cfg.erase("axis_override");
  }
  if (cfg.contains("grid_override")) {
    cfg["sweep"]["grid"] = cfg.at("grid_override");
    cfg.erase("grid_override");
  }
  const auto spec = harness::spec_from_json(cfg);
  const auto report = harness::run_experiment(spec, jobs);
  harness::write_report(report, spec, out_dir);
  for (const auto& a : report.aggregates) {
    std::printf("grid %.4f: runs %zu failures %zu acc %s di %s\n", a.grid_value, a.runs, a.failures,
                a.acc ? a.acc->formatted.c_str() : std::to_string(a.acc_mean).c_str(),
                a.di ? a.di->formatted.c_str() : std::to_string(a.di_mean).c_str());
  }
  for (const auto& r : report.runs) {
    if (!r.ok) std::fprintf(stderr, "run grid=%g seed=%llu failed: %s\n", r.grid_value,
                            static_cast<unsigned long long>(r.seed), r.error.c_str());
  }
  return report.all_ok() ? 0 : 1;
}

int metrics_cmd(const json& cfg_in) {
  json cfg = cfg_in;
  const auto model_path = require(take_string(cfg, "model"), "model");
  const auto data_path = require(take_string(cfg, "data"), "data");
  const auto out = take_string(cfg, "out");
  if (!cfg.empty()) throw ConfigError("unknown metrics setting '" + cfg.begin().key() + "'");
  const auto text = metrics::report_to_json(trainer::evaluate(nnet::load_model(model_path), load_csv(data_path)));
  if (!out.empty()) std::ofstream(out) << text << '\n';
  std::printf("%s\n", text.c_str());
  return 0;
}

int aggregate_crowd_cmd(const json& cfg_in) {
  json cfg = cfg_in;
  const auto responses_path = require(take_string(cfg, "responses"), "responses");
  const auto gold_path = take_string(cfg, "gold");
  const auto out = take_string(cfg, "out");
  const auto n_max = take<std::size_t>(cfg, "n_max", 11);
  const auto threshold = take<double>(cfg, "threshold", kCrowdThreshold);
  const auto min_accuracy = take<double>(cfg, "min_accuracy", 0.0);
  if (!cfg.empty()) throw ConfigError("unknown aggregate-crowd setting '" + cfg.begin().key() + "'");
  auto responses = load_crowd_csv(responses_path);
  if (!gold_path.empty()) responses = filter_workers(responses, load_gold_csv(gold_path), min_accuracy);
  const auto labels = aggregate_crowd_labels(responses, n_max, threshold);
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw Error("cannot write " + out);
  }
  std::ostream& sink = out.empty() ? std::cout : file;
  sink << "question_id,label\n";
  for (const auto& [q, y] : labels) sink << q << ',' << y << '\n';
  return 0;
}

int verify_mi_cmd(const json& cfg_in) {
  json cfg = cfg_in;
  const auto joints = take<std::size_t>(cfg, "joints", 100);
  const auto seed = take<std::uint64_t>(cfg, "seed", 0);
  adversaries::TableAscentOptions opts;
  opts.steps = take<std::size_t>(cfg, "steps", opts.steps);
  opts.step_size = take<double>(cfg, "step_size", opts.step_size);
  if (!cfg.empty()) throw ConfigError("unknown verify-mi setting '" + cfg.begin().key() + "'");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> alphabet(2, 4);
  double exact_gap = 0.0;
  double numeric_gap = 0.0;
  for (std::size_t k = 0; k < joints; ++k) {
    const auto j = adversaries::random_joint(1, alphabet(rng), alphabet(rng), rng());
    const auto r = adversaries::mi_via_discriminator(j, opts);
    const double mi = adversaries::mi_exact(j);
    exact_gap = std::max(exact_gap, std::abs(r.value - mi));
    numeric_gap = std::max(numeric_gap, std::abs(r.numeric_value - mi));
  }
  double cond_exact_gap = 0.0;
  double cond_numeric_gap = 0.0;
  for (std::size_t k = 0; k < joints; ++k) {
    const auto j = adversaries::random_joint(2, k % 2 == 0 ? 2 : 3, 2, rng());
    const auto r = adversaries::cmi_via_discriminator(j, opts);
    const double cmi = adversaries::cmi_exact(j);
    cond_exact_gap = std::max(cond_exact_gap, std::abs(r.value - cmi));
    cond_numeric_gap = std::max(cond_numeric_gap, std::abs(r.numeric_value - cmi));
  }
  const bool ok = exact_gap < 1e-6 && numeric_gap < 1e-3 && cond_exact_gap < 1e-6 && cond_numeric_gap < 1e-3;
  std::printf("mi:  max |posterior - exact| = %.3g, max |numeric - exact| = %.3g\n", exact_gap, numeric_gap);
  std::printf("cmi: max |posterior - exact| = %.3g, max |numeric - exact| = %.3g\n", cond_exact_gap,
              cond_numeric_gap);
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair and robust training lab"};
  app.require_subcommand(1);
  std::string config_path;

  struct Command {
    CLI::App* app;
    Overrides overrides;
    int (*run)(const json&);
  };
  std::vector<Command> commands;
  commands.reserve(7);
  auto add = [&](const char* name, const char* help, int (*run)(const json&)) -> Command& {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file; flags override its keys");
    commands.push_back({sub, {}, run});
    return commands.back();
  };

  auto& gen = add("gen-synth", "generate the synthetic dataset as CSV", gen_synth);
  gen.overrides.add<std::size_t>(gen.app, "--n", "n", "number of examples");
  gen.overrides.add<std::uint64_t>(gen.app, "--seed", "seed", "random seed");
  gen.overrides.add<std::string>(gen.app, "--out", "out", "output CSV");

  auto& poi = add("poison", "flip labels inside one sensitive group", poison_cmd);
  poi.overrides.add<std::string>(poi.app, "--in", "in", "input CSV");
  poi.overrides.add<std::string>(poi.app, "--out", "out", "output CSV");
  poi.overrides.add<int>(poi.app, "--group", "group", "target sensitive code");
  poi.overrides.add<double>(poi.app, "--fraction", "fraction", "flips as a fraction of the dataset");
  poi.overrides.add<std::string>(poi.app, "--strategy", "strategy", "degradation-surrogate or random");
  poi.overrides.add<std::uint64_t>(poi.app, "--seed", "seed", "random seed");
  poi.overrides.add<std::string>(poi.app, "--flips-out", "flips_out", "write flipped indices here");

  auto& tr = add("train", "train FR-Train or the logistic baseline", train_cmd);
  tr.overrides.add<std::string>(tr.app, "--train", "train", "training CSV");
  tr.overrides.add<std::string>(tr.app, "--val", "val", "clean validation CSV");
  tr.overrides.add<std::string>(tr.app, "--test", "test", "evaluation CSV");
  tr.overrides.add<std::string>(tr.app, "--model-out", "model_out", "write the generator as JSON");
  tr.overrides.add<std::string>(tr.app, "--history-out", "history_out", "write per-epoch history CSV");
  tr.overrides.add<std::string>(tr.app, "--metrics-out", "metrics_out", "write the metrics report");
  tr.overrides.add_flag(tr.app, "--baseline", "baseline", true, "train the logistic baseline");
  add_train_overrides(tr.overrides, tr.app);

  auto& sw = add("sweep", "run an experiment grid and write reports", sweep_cmd);
  sw.overrides.add<std::string>(sw.app, "--out-dir", "out_dir", "report directory");
  sw.overrides.add<int>(sw.app, "--jobs", "jobs", "concurrent runs");
  sw.overrides.add<std::vector<std::uint64_t>>(sw.app, "--seeds", "seeds", "seed list");
  sw.overrides.add<double>(sw.app, "--lambda2", "lambda2_override", "robustness knob for every run");
  sw.overrides.add<std::string>(sw.app, "--axis", "axis_override", "none, lambda1, poison_fraction or val_size");
  sw.overrides.add<std::vector<double>>(sw.app, "--grid", "grid_override", "grid values");

  auto& me = add("metrics", "evaluate a saved model on a CSV", metrics_cmd);
  me.overrides.add<std::string>(me.app, "--model", "model", "model JSON");
  me.overrides.add<std::string>(me.app, "--data", "data", "dataset CSV");
  me.overrides.add<std::string>(me.app, "--out", "out", "write the report here");

  auto& ac = add("aggregate-crowd", "average crowd ratings into labels", aggregate_crowd_cmd);
  ac.overrides.add<std::string>(ac.app, "--responses", "responses", "question_id,worker_id,rating CSV");
  ac.overrides.add<std::string>(ac.app, "--gold", "gold", "question_id,label CSV for worker filtering");
  ac.overrides.add<std::size_t>(ac.app, "--n-max", "n_max", "ratings used per question");
  ac.overrides.add<double>(ac.app, "--threshold", "threshold", "label-1 threshold on the mean rating");
  ac.overrides.add<double>(ac.app, "--min-accuracy", "min_accuracy", "worker accuracy floor on gold questions");
  ac.overrides.add<std::string>(ac.app, "--out", "out", "output CSV (stdout when absent)");

  auto& vm = add("verify-mi", "check the discriminator MI identities on random joints", verify_mi_cmd);
  vm.overrides.add<std::size_t>(vm.app, "--joints", "joints", "random joints per check");
  vm.overrides.add<std::uint64_t>(vm.app, "--seed", "seed", "random seed");
  vm.overrides.add<std::size_t>(vm.app, "--steps", "steps", "ascent steps per column");

  CLI11_PARSE(app, argc, argv);
  try {
    for (auto& c : commands) {
      if (c.app->parsed()) {
        return c.run(c.overrides.resolve(config_path));
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
