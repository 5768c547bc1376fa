#include "timesliver/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "timesliver/error.hpp"

namespace timesliver::pipeline {

using nlohmann::json;

SplitPlan SplitPlan::parse(const std::string& text, std::size_t total) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidConfig, "split '" + text + "': '" + item + "' is not a number");
    }
  }
  if (parts.size() != 3)
    fail(ErrorKind::InvalidConfig, "split must have three parts (train,valid,test)");
  for (double p : parts)
    if (!(p >= 0.0)) fail(ErrorKind::InvalidConfig, "split parts must be non-negative");

  SplitPlan plan;
  const bool fractions = parts[0] + parts[1] + parts[2] <= 1.0 + 1e-12;
  if (fractions) {
    plan.train = static_cast<std::size_t>(std::floor(parts[0] * static_cast<double>(total)));
    plan.valid = static_cast<std::size_t>(std::floor(parts[1] * static_cast<double>(total)));
    plan.test = total - plan.train - plan.valid;
  } else {
    for (double p : parts)
      if (p != std::floor(p))
        fail(ErrorKind::InvalidConfig, "split counts must be integers: '" + text + "'");
    plan.train = static_cast<std::size_t>(parts[0]);
    plan.valid = static_cast<std::size_t>(parts[1]);
    plan.test = static_cast<std::size_t>(parts[2]);
  }
  if (plan.train == 0 || plan.valid == 0 || plan.test == 0)
    fail(ErrorKind::InvalidConfig, "every split needs at least one sample");
  if (plan.train + plan.valid + plan.test > total)
    fail(ErrorKind::Validation, "split '" + text + "' needs " +
                                    std::to_string(plan.train + plan.valid + plan.test) +
                                    " samples, dataset has " + std::to_string(total));
  return plan;
}

json SplitPlan::to_json() const { return {{"train", train}, {"valid", valid}, {"test", test}}; }

SplitPlan SplitPlan::from_json(const json& doc) {
  SplitPlan p;
  p.train = doc.at("train").get<std::size_t>();
  p.valid = doc.at("valid").get<std::size_t>();
  p.test = doc.at("test").get<std::size_t>();
  return p;
}

std::size_t SplitPlan::begin_of(const std::string& split) const {
  if (split == "train" || split == "all") return 0;
  if (split == "valid") return train;
  if (split == "test") return train + valid;
  fail(ErrorKind::InvalidConfig, "unknown split '" + split + "'");
}

std::size_t SplitPlan::end_of(const std::string& split) const {
  if (split == "train") return train;
  if (split == "valid") return train + valid;
  if (split == "test" || split == "all") return train + valid + test;
  fail(ErrorKind::InvalidConfig, "unknown split '" + split + "'");
}

Splits apply(const SplitPlan& plan, const datasets::TimeSeriesDataset& data) {
  if (plan.train + plan.valid + plan.test > data.count)
    fail(ErrorKind::Validation, "split plan exceeds the dataset size");
  Splits s{data.slice(0, plan.train), data.slice(plan.train, plan.train + plan.valid),
           data.slice(plan.train + plan.valid, plan.train + plan.valid + plan.test)};
  s.train.split = "train";
  s.valid.split = "valid";
  s.test.split = "test";
  return s;
}

void check_compatible(const model::ModelParams& params, const datasets::TimeSeriesDataset& data) {
  if (data.length != params.length || data.variates != params.variates)
    fail(ErrorKind::ShapeMismatch,
         "dataset is " + std::to_string(data.length) + " x " + std::to_string(data.variates) +
             " but the model expects " + std::to_string(params.length) + " x " +
             std::to_string(params.variates));
  for (std::int32_t label : data.y)
    if (label < 0 || static_cast<std::size_t>(label) >= params.classes)
      fail(ErrorKind::Validation, "dataset label " + std::to_string(label) +
                                      " is outside the model's " +
                                      std::to_string(params.classes) + " classes");
}

eval::Scores phi_plus_scores(const model::ModelParams& params,
                             const datasets::TimeSeriesDataset& data,
                             const attribution::AttributionConfig& config, std::size_t jobs) {
  auto results = attribution::attribute_all(data, params, config, jobs);
  eval::Scores scores(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) scores[i] = std::move(results[i].phi_plus);
  return scores;
}

namespace {

void score_into(VariantResult& row, const model::ModelParams& params, const Splits& splits,
                const attribution::AttributionConfig& attr, std::size_t jobs) {
  row.auprc = std::numeric_limits<double>::quiet_NaN();
  row.auprc_stddev = std::numeric_limits<double>::quiet_NaN();
  if (!splits.test.has_mask()) return;
  const auto summary = eval::auprc_dataset(phi_plus_scores(params, splits.test, attr, jobs),
                                           splits.test);
  row.auprc = summary.mean;
  row.auprc_stddev = summary.stddev;
}

void log_row(const RunOptions& options, const VariantResult& row) {
  if (!options.log) return;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: accuracy %.4f, AUPRC %.4f", row.name.c_str(),
                row.accuracy, row.auprc);
  options.log(buf);
}

}  // namespace

VariantResult train_and_score(const std::string& name, const Splits& splits,
                              const model::TimeSliverConfig& config,
                              const attribution::AttributionConfig& attr,
                              const RunOptions& options) {
  model::TrainOptions topts;
  topts.jobs = options.jobs;
  if (options.log) {
    topts.on_epoch = [&](const model::EpochRecord& r) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "[%s] epoch %zu loss %.5f acc %.4f valid %.4f%s",
                    name.c_str(), r.epoch, r.train_loss, r.train_accuracy, r.valid_accuracy,
                    r.checkpoint ? " *" : "");
      options.log(buf);
    };
  }
  const auto trained = model::train(splits.train, splits.valid, config, topts);
  VariantResult row;
  row.name = name;
  row.parameters = trained.params.parameter_count();
  row.best_epoch = trained.best_epoch;
  row.accuracy = model::evaluate(trained.params, splits.test, options.jobs).accuracy;
  score_into(row, trained.params, splits, attr, options.jobs);
  log_row(options, row);
  return row;
}

std::vector<std::string> study_names() { return {"pooling", "gate", "raw_z"}; }

std::vector<VariantResult> ablate(const std::string& study, const Splits& splits,
                                  const model::TimeSliverConfig& config,
                                  const attribution::AttributionConfig& attr,
                                  const RunOptions& options) {
  std::vector<VariantResult> rows;
  if (study == "pooling") {
    for (auto pooling : {model::Pooling::Avg, model::Pooling::Max, model::Pooling::None}) {
      auto cfg = config;
      cfg.pooling = pooling;
      rows.push_back(train_and_score(model::to_string(pooling), splits, cfg, attr, options));
    }
  } else if (study == "raw_z") {
    for (auto rep : {model::Representation::Symbolic, model::Representation::RawProjection}) {
      auto cfg = config;
      cfg.representation = rep;
      rows.push_back(train_and_score(model::to_string(rep), splits, cfg, attr, options));
    }
  } else if (study == "gate") {
    // The gate only enters attribution, so one trained model serves every row.
    model::TrainOptions topts;
    topts.jobs = options.jobs;
    const auto trained = model::train(splits.train, splits.valid, config, topts);
    const double accuracy = model::evaluate(trained.params, splits.test, options.jobs).accuracy;
    struct Variant {
      const char* name;
      attribution::Gate gate;
      bool max_scaling;
    };
    const Variant variants[] = {
        {"relu", attribution::Gate::Relu, true},
        {"relu_no_max_scaling", attribution::Gate::Relu, false},
        {"sigmoid", attribution::Gate::Sigmoid, true},
        {"tanh", attribution::Gate::Tanh, true},
        {"identity", attribution::Gate::Identity, true},
        {"abs", attribution::Gate::Abs, true},
    };
    for (const auto& v : variants) {
      auto a = attr;
      a.gate = v.gate;
      a.max_scaling = v.max_scaling;
      VariantResult row;
      row.name = v.name;
      row.accuracy = accuracy;
      row.parameters = trained.params.parameter_count();
      row.best_epoch = trained.best_epoch;
      score_into(row, trained.params, splits, a, options.jobs);
      log_row(options, row);
      rows.push_back(row);
    }
  } else {
    fail(ErrorKind::InvalidConfig, "unknown ablation study '" + study + "'");
  }
  return rows;
}

void write_variants_csv(std::ostream& out, const std::vector<VariantResult>& rows) {
  out << "variant,accuracy,auprc,auprc_std,parameters,best_epoch\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%zu,%zu\n", r.name.c_str(), r.accuracy,
                  r.auprc, r.auprc_stddev, r.parameters, r.best_epoch);
    out << buf;
  }
}

}  // namespace timesliver::pipeline
