// timesliver: batch front end for generation, training, attribution,
// evaluation and ablation runs. Logs go to stderr; summaries to stdout.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "timesliver/attribution.hpp"
#include "timesliver/datasets.hpp"
#include "timesliver/error.hpp"
#include "timesliver/eval.hpp"
#include "timesliver/io.hpp"
#include "timesliver/model.hpp"
#include "timesliver/pipeline.hpp"
#include "timesliver/symbolic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace timesliver;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int verbosity = 1;

void log(const std::string& line) {
  if (verbosity > 0) std::cerr << line << '\n';
}

void debug(const std::string& line) {
  if (verbosity > 1) std::cerr << line << '\n';
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, path + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

// "key=value" overrides; the value is parsed as JSON and falls back to a
// plain string ("pooling=max").
json parse_overrides(const std::vector<std::string>& items) {
  json out = json::object();
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      fail(ErrorKind::InvalidConfig, "expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    out[key] = value.is_discarded() ? json(text) : value;
  }
  return out;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidConfig, "'" + item + "' is not a number");
    }
  }
  if (out.empty()) fail(ErrorKind::InvalidConfig, "empty list");
  return out;
}

std::string dataset_hash(const datasets::TimeSeriesDataset& d) {
  if (d.provenance.contains("config_hash")) return d.provenance["config_hash"];
  return io::config_hash({{"provenance", d.provenance},
                          {"shape", {d.count, d.length, d.variates, d.classes}}});
}

// ---------------------------------------------------------------------------
// Model config assembly shared by train and ablate.

struct ModelFlags {
  std::string preset;
  std::string config_file;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> patience;
  std::string pooling;
  std::string representation;

  void add(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "Start from a shipped configuration")
        ->check(CLI::IsMember(model::preset_names()));
    cmd->add_option("--config", config_file, "JSON model config (overrides the preset)");
    cmd->add_option("--set", set, "key=value override, repeatable (applied last)");
    cmd->add_option("--seed", seed, "Initialization and shuffling seed");
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--epochs", epochs, "Maximum epochs");
    cmd->add_option("--patience", patience, "Early-stopping patience in epochs");
    cmd->add_option("--pooling", pooling, "avg | max | none");
    cmd->add_option("--representation", representation, "symbolic | raw_z");
  }

  model::TimeSliverConfig build() const {
    model::TimeSliverConfig c = preset.empty() ? model::TimeSliverConfig{} : model::preset(preset);
    if (!config_file.empty()) c = model::TimeSliverConfig::from_json(read_json_file(config_file), c);
    json flags = json::object();
    if (seed) flags["seed"] = *seed;
    if (lr) flags["learning_rate"] = *lr;
    if (epochs) flags["max_epochs"] = *epochs;
    if (patience) flags["patience"] = *patience;
    if (!pooling.empty()) flags["pooling"] = pooling;
    if (!representation.empty()) flags["representation"] = representation;
    c = model::TimeSliverConfig::from_json(flags, c);
    return model::TimeSliverConfig::from_json(parse_overrides(set), c);
  }
};

struct AttrFlags {
  std::string gate = "relu";
  bool no_max_scaling = false;
  double epsilon = 1e-18;
  std::string reduction = "mean";
  std::optional<std::size_t> target;

  void add(CLI::App* cmd, bool with_target) {
    cmd->add_option("--gate", gate, "relu | abs | sigmoid | tanh | identity")->capture_default_str();
    cmd->add_flag("--no-max-scaling", no_max_scaling, "Disable per-entry max scaling");
    cmd->add_option("--epsilon", epsilon, "Stabilizer added to max-scaling denominators")->capture_default_str();
    cmd->add_option("--reduction", reduction, "Segment-to-time reduction: mean | sum")->capture_default_str();
    if (with_target) cmd->add_option("--target", target, "Explain this class instead of the prediction");
  }

  attribution::AttributionConfig build() const {
    attribution::AttributionConfig a;
    a.gate = attribution::parse_gate(gate);
    a.max_scaling = !no_max_scaling;
    a.epsilon = epsilon;
    a.reduction = attribution::parse_reduction(reduction);
    a.target = target;
    a.validate();
    return a;
  }
};

json attr_json(const attribution::AttributionConfig& a) {
  json j = {{"gate", attribution::to_string(a.gate)},
            {"max_scaling", a.max_scaling},
            {"epsilon", a.epsilon},
            {"reduction", attribution::to_string(a.reduction)}};
  if (a.target) j["target"] = *a.target;
  return j;
}

pipeline::SplitPlan plan_of(const io::ModelArtifact& art, std::size_t count) {
  if (art.metadata.contains("split")) return pipeline::SplitPlan::from_json(art.metadata["split"]);
  return pipeline::SplitPlan{0, 0, count};
}

datasets::TimeSeriesDataset split_view(const datasets::TimeSeriesDataset& data,
                                       const pipeline::SplitPlan& plan, const std::string& split,
                                       std::size_t& first) {
  first = plan.begin_of(split);
  const std::size_t end = plan.end_of(split);
  if (end > data.count || first >= end)
    fail(ErrorKind::Validation, "split '" + split + "' is empty or outside this dataset");
  return data.slice(first, end);
}

io::ModelArtifact load_checked(const std::string& model_dir,
                               const datasets::TimeSeriesDataset& data) {
  auto art = io::load_model(model_dir);
  pipeline::check_compatible(art.params, data);
  return art;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string name;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> params;
  std::string params_file;
  bool force = false;
};

int cmd_gen(const GenArgs& a, std::size_t jobs) {
  const auto names = datasets::generator_names();
  if (std::find(names.begin(), names.end(), a.name) == names.end())
    fail(ErrorKind::InvalidConfig, "unknown generator '" + a.name + "'");
  const fs::path out(a.out);
  if (fs::exists(out) && !fs::is_empty(out) && !a.force)
    fail(ErrorKind::InvalidConfig, out.string() + " exists; pass --force to overwrite");

  json params = a.params_file.empty() ? json::object() : read_json_file(a.params_file);
  const json overrides = parse_overrides(a.params);
  for (const auto& [k, v] : overrides.items()) params[k] = v;

  datasets::GeneratorSpec spec{a.name, a.n, a.seed, params, jobs};
  const json snapshot = {{"command", "gen"},
                         {"generator", a.name},
                         {"n", a.n},
                         {"seed", a.seed},
                         {"parameters", params}};
  const std::string hash = io::config_hash(snapshot);
  log("generating " + std::to_string(a.n) + " " + a.name + " samples (seed " +
      std::to_string(a.seed) + ")");
  auto data = datasets::generate(spec);
  data.provenance["config_hash"] = hash;
  datasets::save(data, out);
  write_json_file(out / "run.json", json{{"config", snapshot}, {"config_hash", hash}});
  std::cout << json{{"out", out.string()},
                    {"count", data.count},
                    {"length", data.length},
                    {"variates", data.variates},
                    {"classes", data.classes},
                    {"config_hash", hash}}
                   .dump()
            << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string split = "0.8,0.1,0.1";
  ModelFlags model;
};

int cmd_train(const TrainArgs& a, std::size_t jobs) {
  const auto data = datasets::load(a.data);
  const auto config = a.model.build();
  config.validate(data.length, data.variates);
  const auto plan = pipeline::SplitPlan::parse(a.split, data.count);
  const auto splits = pipeline::apply(plan, data);

  const json run = {{"command", "train"},
                    {"data", a.data},
                    {"data_hash", dataset_hash(data)},
                    {"split", plan.to_json()},
                    {"preset", a.model.preset}};
  {
    // Parameter count before any training, for comparison with references.
    auto edges = symbolic::fit_bins(std::span<const float>(splits.train.x), data.variates,
                                    {config.bins, 1, config.bin_strategy});
    const auto probe = model::init_params(config, data.length, data.variates, data.classes,
                                          std::move(edges), config.seed);
    log("trainable parameters: " + std::to_string(probe.parameter_count()));
  }
  log("training on " + std::to_string(plan.train) + " samples, validating on " +
      std::to_string(plan.valid));

  model::TrainOptions topts;
  topts.jobs = jobs;
  topts.on_epoch = [](const model::EpochRecord& r) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "epoch %3zu  loss %.5f  acc %.4f  valid loss %.5f  acc %.4f%s",
                  r.epoch, r.train_loss, r.train_accuracy, r.valid_loss, r.valid_accuracy,
                  r.checkpoint ? "  (checkpoint)" : "");
    log(buf);
  };
  const auto result = model::train(splits.train, splits.valid, config, topts);
  const auto test = model::evaluate(result.params, splits.test, jobs);

  const fs::path out(a.out);
  io::save_model(result.params, out, run);
  const auto hash = io::load_model(out).config_hash;
  {
    std::ofstream hist(out / "history.csv", std::ios::trunc);
    if (!hist) fail(ErrorKind::Io, "cannot write history.csv");
    hist << "# config_hash=" << hash << '\n';
    io::write_history_csv(hist, result.history);
  }
  const json summary = {{"config_hash", hash},
                        {"parameters", result.params.parameter_count()},
                        {"best_epoch", result.best_epoch},
                        {"epochs_run", result.history.size()},
                        {"stopped_early", result.stopped_early},
                        {"valid_accuracy", result.best_valid_accuracy},
                        {"valid_loss", result.best_valid_loss},
                        {"test_accuracy", test.accuracy},
                        {"test_loss", test.loss}};
  write_json_file(out / "summary.json", summary);
  write_json_file(out / "run.json", json{{"config", config.to_json()}, {"run", run},
                                         {"config_hash", hash}});
  std::cout << summary.dump() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct AttributeArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string split = "test";
  AttrFlags attr;
};

int cmd_attribute(const AttributeArgs& a, std::size_t jobs) {
  const auto data = datasets::load(a.data);
  const auto art = load_checked(a.model, data);
  const auto cfg = a.attr.build();
  if (cfg.target && *cfg.target >= art.params.classes)
    fail(ErrorKind::InvalidConfig, "--target exceeds the model's class count");
  std::size_t first = 0;
  const auto subset = split_view(data, plan_of(art, data.count), a.split, first);

  log("attributing " + std::to_string(subset.count) + " samples (" + a.split + " split)");
  const auto results = attribution::attribute_all(subset, art.params, cfg, jobs);

  const json snapshot = {{"command", "attribute"},
                         {"model_hash", art.config_hash},
                         {"data_hash", dataset_hash(data)},
                         {"split", a.split},
                         {"attribution", attr_json(cfg)}};
  const std::string hash = io::config_hash(snapshot);
  std::ofstream out(a.out, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + a.out);
  out << "# config_hash=" << hash << '\n';
  attribution::write_csv(out, results, first);
  out.close();
  write_json_file(a.out + ".json", json{{"config", snapshot}, {"config_hash", hash}});
  std::cout << json{{"out", a.out}, {"samples", results.size()}, {"config_hash", hash}}.dump()
            << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string model;
  std::string attributions;
  std::string out;
  std::uint64_t random_seed = 0;
  // occlusion
  std::string method = "both";
  std::string grid;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> max_epochs;
  std::optional<std::size_t> patience;
  double upper = 20.0;
  // negmask
  std::string percents = "2,5";
  AttrFlags attr;
};

attribution::AttributionTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  return attribution::read_csv(in);
}

int cmd_eval_auprc(const EvalArgs& a) {
  const auto data = datasets::load(a.data);
  if (!data.has_mask()) fail(ErrorKind::Validation, "dataset has no ground-truth mask");
  const auto table = read_table(a.attributions);
  std::vector<std::size_t> ids = table.sample_ids;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= data.count)
      fail(ErrorKind::Validation, "sample_id " + std::to_string(ids[i]) + " is not in the dataset");
    if (table.phi_plus[i].size() != data.length)
      fail(ErrorKind::ShapeMismatch, "attribution length " +
                                         std::to_string(table.phi_plus[i].size()) +
                                         " differs from dataset length " +
                                         std::to_string(data.length));
  }
  const auto subset = data.select(ids);
  const auto summary = eval::auprc_dataset(table.phi_plus, subset);
  const auto random = eval::auprc_dataset(eval::random_scores(a.random_seed, subset), subset);

  const json report = {{"auprc_mean", summary.mean},
                       {"auprc_std", summary.stddev},
                       {"scored", summary.scored},
                       {"skipped", summary.skipped},
                       {"random_auprc_mean", random.mean},
                       {"random_auprc_std", random.stddev},
                       {"random_seed", a.random_seed},
                       {"config_hash", io::config_hash({{"command", "eval auprc"},
                                                        {"attributions", a.attributions},
                                                        {"data_hash", dataset_hash(data)},
                                                        {"random_seed", a.random_seed}})}};
  if (!a.out.empty()) write_json_file(a.out, report);
  char buf[128];
  std::snprintf(buf, sizeof buf, "AUPRC %.4f +- %.4f over %zu samples (random %.4f)",
                summary.mean, summary.stddev, summary.scored, random.mean);
  log(buf);
  std::cout << report.dump() << '\n';
  return kOk;
}

int cmd_eval_occlusion(const EvalArgs& a, std::size_t jobs) {
  if (a.out.empty()) fail(ErrorKind::InvalidConfig, "occlusion needs --out <directory>");
  if (a.method != "both" && a.method != "timesliver" && a.method != "random")
    fail(ErrorKind::InvalidConfig, "--method must be timesliver, random or both");
  const auto data = datasets::load(a.data);
  const auto art = load_checked(a.model, data);
  const auto plan = plan_of(art, data.count);
  if (plan.train == 0) fail(ErrorKind::Validation, "model carries no train/valid/test split");
  const auto splits = pipeline::apply(plan, data);
  const auto cfg = a.attr.build();

  auto config = art.params.config;
  if (a.max_epochs) config.max_epochs = *a.max_epochs;
  if (a.patience) config.patience = *a.patience;

  eval::OcclusionOptions opts;
  if (!a.grid.empty()) opts.grid = parse_list(a.grid);
  opts.trials = a.trials;
  opts.seed = a.seed;
  opts.jobs = jobs;
  opts.log = [](const std::string& s) { debug(s); };

  const fs::path out(a.out);
  fs::create_directories(out);
  const json base = {{"command", "eval occlusion"},
                     {"model_hash", art.config_hash},
                     {"data_hash", dataset_hash(data)},
                     {"retrain_config", config.to_json()},
                     {"grid", opts.grid},
                     {"trials", opts.trials},
                     {"seed", opts.seed},
                     {"upper", a.upper},
                     {"attribution", attr_json(cfg)}};

  std::vector<std::string> methods;
  if (a.method != "random") methods.push_back("timesliver");
  if (a.method != "timesliver") methods.push_back("random");
  json summary = json::object();
  for (const auto& method : methods) {
    eval::SplitScores scores;
    if (method == "timesliver") {
      log("attributing all splits with the trained model");
      scores = {pipeline::phi_plus_scores(art.params, splits.train, cfg, jobs),
                pipeline::phi_plus_scores(art.params, splits.valid, cfg, jobs),
                pipeline::phi_plus_scores(art.params, splits.test, cfg, jobs)};
    } else {
      scores = {eval::random_scores(a.random_seed, splits.train),
                eval::random_scores(a.random_seed + 1, splits.valid),
                eval::random_scores(a.random_seed + 2, splits.test)};
    }
    log("occlusion curve for " + method + " (" + std::to_string(opts.grid.size()) +
        " grid points)");
    auto report = eval::occlusion_curve(splits.train, splits.valid, splits.test, scores, config, opts);
    std::vector<double> grid, values;
    for (const auto& p : report.points)
      if (!p.missing) {
        grid.push_back(p.u);
        values.push_back(p.mean);
      }
    const double i_upper = eval::integrate(grid, values, report.e0, a.upper);
    json doc = base;
    doc["method"] = method;
    const std::string hash = io::config_hash(doc);
    json rep = report.to_json();
    rep["config"] = doc;
    rep["config_hash"] = hash;
    rep["i_upper"] = i_upper;
    write_json_file(out / ("occlusion_" + method + ".json"), rep);
    std::ofstream table(out / ("occlusion_" + method + ".csv"), std::ios::trunc);
    table << "# config_hash=" << hash << '\n';
    eval::write_occlusion_table(table, report);
    summary[method] = {{"i100", report.i100}, {"i20", report.i20}, {"i_upper", i_upper},
                       {"e0", report.e0}, {"config_hash", hash}};
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: I(100) %.3f  I(20) %.3f", method.c_str(), report.i100,
                  report.i20);
    log(buf);
  }
  if (summary.contains("timesliver") && summary.contains("random")) {
    const double r = summary["random"]["i20"].get<double>();
    summary["i20_ratio"] = r > 0.0 ? summary["timesliver"]["i20"].get<double>() / r : 0.0;
  }
  write_json_file(out / "occlusion_summary.json", summary);
  std::cout << summary.dump() << '\n';
  return kOk;
}

int cmd_eval_negmask(const EvalArgs& a, std::size_t jobs) {
  const auto data = datasets::load(a.data);
  const auto art = load_checked(a.model, data);
  eval::Scores plus, minus;
  datasets::TimeSeriesDataset subset;
  if (!a.attributions.empty()) {
    auto table = read_table(a.attributions);
    for (auto id : table.sample_ids)
      if (id >= data.count)
        fail(ErrorKind::Validation, "sample_id " + std::to_string(id) + " is not in the dataset");
    subset = data.select(table.sample_ids);
    for (const auto& row : table.phi_plus)
      if (row.size() != data.length)
        fail(ErrorKind::ShapeMismatch, "attribution length differs from dataset length");
    plus = std::move(table.phi_plus);
    minus = std::move(table.phi_minus);
  } else {
    std::size_t first = 0;
    subset = split_view(data, plan_of(art, data.count), "test", first);
    for (auto& r : attribution::attribute_all(subset, art.params, a.attr.build(), jobs)) {
      plus.push_back(std::move(r.phi_plus));
      minus.push_back(std::move(r.phi_minus));
    }
  }
  const auto percents = parse_list(a.percents);
  const auto report = eval::delta_logit_neg(art.params, subset, plus, minus, percents, jobs);
  json doc = report.to_json();
  doc["config_hash"] = io::config_hash({{"command", "eval negmask"},
                                        {"model_hash", art.config_hash},
                                        {"data_hash", dataset_hash(data)},
                                        {"attributions", a.attributions},
                                        {"percents", percents}});
  if (!a.out.empty()) write_json_file(a.out, doc);
  for (const auto& level : report.levels) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "delta logit at %g%%: %.4f +- %.4f", level.percent,
                  level.mean, level.stddev);
    log(buf);
  }
  std::cout << doc.dump() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string study;
  std::string data;
  std::string out;
  std::string split = "0.8,0.1,0.1";
  ModelFlags model;
  AttrFlags attr;
};

int cmd_ablate(const AblateArgs& a, std::size_t jobs) {
  const auto data = datasets::load(a.data);
  const auto config = a.model.build();
  config.validate(data.length, data.variates);
  const auto plan = pipeline::SplitPlan::parse(a.split, data.count);
  const auto splits = pipeline::apply(plan, data);
  const auto attr = a.attr.build();

  pipeline::RunOptions opts;
  opts.jobs = jobs;
  opts.log = [](const std::string& s) { log(s); };
  const auto rows = pipeline::ablate(a.study, splits, config, attr, opts);

  const json snapshot = {{"command", "ablate"},
                         {"study", a.study},
                         {"data_hash", dataset_hash(data)},
                         {"split", plan.to_json()},
                         {"config", config.to_json()},
                         {"attribution", attr_json(attr)}};
  const std::string hash = io::config_hash(snapshot);
  std::ostringstream table;
  pipeline::write_variants_csv(table, rows);
  if (!a.out.empty()) {
    const fs::path out(a.out);
    fs::create_directories(out);
    std::ofstream csv(out / ("ablation_" + a.study + ".csv"), std::ios::trunc);
    csv << "# config_hash=" << hash << '\n' << table.str();
    write_json_file(out / ("ablation_" + a.study + ".json"),
                    json{{"config", snapshot}, {"config_hash", hash}});
  }
  std::cout << table.str();
  return kOk;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig: return kUsage;
    case ErrorKind::NumericFailure: return kNumeric;
    default: return kData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TimeSliver: symbolic-linear time-series classification with temporal attribution"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t jobs = 1;
  bool quiet = false;
  int verbose = 0;
  app.add_option("-j,--jobs", jobs, "Worker threads for attribution and retraining")
      ->check(CLI::Range(std::size_t{1}, std::size_t{256}));
  app.add_flag("-q,--quiet", quiet, "Only print results");
  app.add_flag("-v,--verbose", verbose, "More progress output");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset directory");
  g->add_option("name", gen.name, "freqsum | seqcomb_uv | seqcomb_mv | lowvar | farfield")
      ->required();
  g->add_option("--n", gen.n, "Number of samples")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--param", gen.params, "Generator parameter key=value, repeatable");
  g->add_option("--params", gen.params_file, "JSON file with generator parameters");
  g->add_flag("--force", gen.force, "Overwrite an existing directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on a dataset directory");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--out", tr.out, "Model output directory")->required();
  t->add_option("--split", tr.split, "train,valid,test as counts or fractions")->capture_default_str();
  tr.model.add(t);

  AttributeArgs at;
  auto* ac = app.add_subcommand("attribute", "Export per-time-point attributions");
  ac->add_option("--model", at.model, "Model directory")->required();
  ac->add_option("--data", at.data, "Dataset directory")->required();
  ac->add_option("--out", at.out, "Output CSV")->required();
  ac->add_option("--split", at.split, "train | valid | test | all")->capture_default_str()
      ->check(CLI::IsMember({"train", "valid", "test", "all"}));
  at.attr.add(ac, true);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Explainability metrics");
  e->require_subcommand(1);
  auto* ea = e->add_subcommand("auprc", "Dataset-mean AUPRC of phi+ against ground truth");
  ea->add_option("--attributions", ev.attributions, "Attribution CSV")->required();
  ea->add_option("--data", ev.data, "Dataset directory")->required();
  ea->add_option("--out", ev.out, "Report JSON");
  ea->add_option("--random-seed", ev.random_seed, "Seed of the random baseline")->capture_default_str();
  auto* eo = e->add_subcommand("occlusion", "Keep-top-u% retraining curve and I(U)");
  eo->add_option("--model", ev.model, "Model directory")->required();
  eo->add_option("--data", ev.data, "Dataset directory")->required();
  eo->add_option("--out", ev.out, "Report directory")->required();
  eo->add_option("--method", ev.method, "timesliver | random | both")->capture_default_str();
  eo->add_option("--grid", ev.grid, "Comma-separated u values in percent");
  eo->add_option("--trials", ev.trials, "Retraining seeds per grid point")->capture_default_str()
      ->check(CLI::PositiveNumber);
  eo->add_option("--seed", ev.seed, "Base retraining seed")->capture_default_str();
  eo->add_option("--random-seed", ev.random_seed, "Seed of the random baseline")->capture_default_str();
  eo->add_option("--max-epochs", ev.max_epochs, "Cap on retraining epochs");
  eo->add_option("--patience", ev.patience, "Retraining patience");
  eo->add_option("--upper", ev.upper, "Also report I(upper)")->capture_default_str();
  ev.attr.add(eo, false);
  auto* en = e->add_subcommand("negmask", "Predicted-logit change after masking top phi- points");
  en->add_option("--model", ev.model, "Model directory")->required();
  en->add_option("--data", ev.data, "Dataset directory")->required();
  en->add_option("--attributions", ev.attributions, "Attribution CSV (computed when absent)");
  en->add_option("--percents", ev.percents, "Comma-separated u- values in percent")->capture_default_str();
  en->add_option("--out", ev.out, "Report JSON");
  ev.attr.add(en, false);

  AblateArgs ab;
  auto* abl = app.add_subcommand("ablate", "Train and score configuration variants");
  abl->add_option("study", ab.study, "pooling | gate | raw_z")
      ->required()
      ->check(CLI::IsMember(pipeline::study_names()));
  abl->add_option("--data", ab.data, "Dataset directory")->required();
  abl->add_option("--out", ab.out, "Report directory");
  abl->add_option("--split", ab.split, "train,valid,test as counts or fractions")->capture_default_str();
  ab.model.add(abl);
  ab.attr.add(abl, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }
  verbosity = quiet ? 0 : 1 + verbose;

  try {
    if (g->parsed()) return cmd_gen(gen, jobs);
    if (t->parsed()) return cmd_train(tr, jobs);
    if (ac->parsed()) return cmd_attribute(at, jobs);
    if (ea->parsed()) return cmd_eval_auprc(ev);
    if (eo->parsed()) return cmd_eval_occlusion(ev, jobs);
    if (en->parsed()) return cmd_eval_negmask(ev, jobs);
    if (abl->parsed()) return cmd_ablate(ab, jobs);
  } catch (const Error& err) {
    std::cerr << "error (" << to_string(err.kind()) << "): " << err.what() << '\n';
    return exit_code(err.kind());
  } catch (const json::exception& err) {
    std::cerr << "error (invalid-config): " << err.what() << '\n';
    return kUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  }
  return kUsage;
}
