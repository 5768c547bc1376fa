#pragma once

// Explainability metrics: AUPRC against ground-truth masks, keep-top
// occlusion curves with retraining, negative-attribution masking and the
// seeded random baseline.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "timesliver/attribution.hpp"
#include "timesliver/datasets.hpp"
#include "timesliver/model.hpp"

namespace timesliver::eval {

using Scores = std::vector<std::vector<double>>;

/// Scores are softmax-normalized, then swept over unique thresholds in
/// descending order; area = sum (R_k - R_{k-1}) P_k. Empty when the mask
/// has no positives.
std::optional<double> auprc(std::span<const double> scores, std::span<const std::uint8_t> mask);

struct AuprcSummary {
  std::vector<double> per_sample;  // NaN for skipped samples
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t scored = 0;
  std::size_t skipped = 0;
};

AuprcSummary auprc_dataset(const Scores& scores, const datasets::TimeSeriesDataset& data);

enum class MaskDirection {
  KeepTop,  // zero everything except the top-ranked points
  MaskTop,  // zero only the top-ranked points
};

/// ceil(percent * L / 100), at least 1 for any positive percent.
std::size_t mask_count(double percent, std::size_t length);

/// Indices ordered by descending score, ties by ascending index.
std::vector<std::size_t> rank_descending(std::span<const double> scores);

/// Applies the mask to every sample; `percent` is in (0, 100] for KeepTop
/// and [0, 100] for MaskTop. Masked points are zeroed across all variates.
datasets::TimeSeriesDataset mask_top(const datasets::TimeSeriesDataset& data,
                                     const Scores& scores, double percent,
                                     MaskDirection direction);

/// Trapezoid area of e(u) over [0, upper] using (0, e0) and the grid points;
/// linear interpolation at `upper` when it falls between grid points.
double integrate(std::span<const double> grid, std::span<const double> values, double e0,
                 double upper);

std::vector<double> default_grid();

struct OcclusionPoint {
  double u = 0.0;
  std::vector<double> accuracies;  // one per completed trial
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> epochs;
  double mean = 0.0;
  double stddev = 0.0;
  bool missing = false;
};

struct OcclusionReport {
  std::vector<OcclusionPoint> points;
  double e0 = 0.0;
  double i100 = 0.0;
  double i20 = 0.0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

struct OcclusionOptions {
  std::vector<double> grid = default_grid();
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::function<void(const std::string&)> log;
};

struct SplitScores {
  Scores train;
  Scores valid;
  Scores test;
};

/// For every u: keep the top u% points of each sample in all three splits,
/// retrain from scratch and record test accuracy.
OcclusionReport occlusion_curve(const datasets::TimeSeriesDataset& train_set,
                                const datasets::TimeSeriesDataset& valid_set,
                                const datasets::TimeSeriesDataset& test_set,
                                const SplitScores& scores, const model::TimeSliverConfig& config,
                                const OcclusionOptions& options = {});

void write_occlusion_table(std::ostream& out, const OcclusionReport& report);

struct NegMaskLevel {
  double percent = 0.0;
  std::vector<double> deltas;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t fallbacks = 0;  // samples with phi- == 0 ranked by lowest phi+
};

struct NegMaskReport {
  std::vector<NegMaskLevel> levels;
  nlohmann::json to_json() const;
};

/// Masks the top u- percent of points by phi- and reports the change in the
/// originally predicted logit, without retraining.
NegMaskReport delta_logit_neg(const model::ModelParams& params,
                              const datasets::TimeSeriesDataset& test_set,
                              const Scores& phi_plus, const Scores& phi_minus,
                              std::span<const double> percents, std::size_t jobs = 1);

/// Seeded uniform scores; sample i uses stream (seed, i).
Scores random_scores(std::uint64_t seed, const datasets::TimeSeriesDataset& data);

double mean(std::span<const double> values);
/// Population standard deviation.
double stddev(std::span<const double> values);

}  // namespace timesliver::eval
