#pragma once

// End-to-end helpers shared by the command-line tool, the acceptance run and
// the Python bindings: split plans, train-and-score runs and ablation studies.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "timesliver/attribution.hpp"
#include "timesliver/datasets.hpp"
#include "timesliver/eval.hpp"
#include "timesliver/model.hpp"

namespace timesliver::pipeline {

/// Contiguous train / valid / test partition of a dataset directory.
struct SplitPlan {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;

  /// "a,b,c" as counts ("2000,500,500") or fractions summing to at most 1
  /// ("0.8,0.1,0.1"); fractions floor, and test takes the remainder.
  static SplitPlan parse(const std::string& text, std::size_t total);
  nlohmann::json to_json() const;
  static SplitPlan from_json(const nlohmann::json& doc);

  std::size_t begin_of(const std::string& split) const;
  std::size_t end_of(const std::string& split) const;
};

struct Splits {
  datasets::TimeSeriesDataset train;
  datasets::TimeSeriesDataset valid;
  datasets::TimeSeriesDataset test;
};

Splits apply(const SplitPlan& plan, const datasets::TimeSeriesDataset& data);

/// Refuses datasets whose length or variate count differ from the model.
void check_compatible(const model::ModelParams& params, const datasets::TimeSeriesDataset& data);

/// Attribution scores (phi+) per sample.
eval::Scores phi_plus_scores(const model::ModelParams& params,
                             const datasets::TimeSeriesDataset& data,
                             const attribution::AttributionConfig& config, std::size_t jobs);

using Log = std::function<void(const std::string&)>;

struct VariantResult {
  std::string name;
  double accuracy = 0.0;
  double auprc = 0.0;         // NaN when the data has no ground-truth mask
  double auprc_stddev = 0.0;
  std::size_t parameters = 0;
  std::size_t best_epoch = 0;
};

struct RunOptions {
  std::size_t jobs = 1;
  Log log;
};

/// Trains `config` on splits.train / splits.valid, then reports test
/// accuracy and phi+ AUPRC under `attr`.
VariantResult train_and_score(const std::string& name, const Splits& splits,
                              const model::TimeSliverConfig& config,
                              const attribution::AttributionConfig& attr,
                              const RunOptions& options = {});

std::vector<std::string> study_names();

/// pooling: {avg, max, none}. gate: one trained model scored under the
/// activation variants {relu, relu (no max-scaling), sigmoid, tanh,
/// identity, abs}. raw_z: {symbolic Z, raw projection}.
std::vector<VariantResult> ablate(const std::string& study, const Splits& splits,
                                  const model::TimeSliverConfig& config,
                                  const attribution::AttributionConfig& attr,
                                  const RunOptions& options = {});

void write_variants_csv(std::ostream& out, const std::vector<VariantResult>& rows);

}  // namespace timesliver::pipeline
