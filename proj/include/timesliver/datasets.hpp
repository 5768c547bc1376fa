#pragma once

// Time-series datasets: in-memory record, synthetic generators with
// ground-truth saliency, on-disk directory format and CSV ingestion.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "timesliver/tensor.hpp"

namespace timesliver::datasets {

inline constexpr int kFormatVersion = 1;

struct TimeSeriesDataset {
  std::size_t count = 0;
  std::size_t length = 0;
  std::size_t variates = 0;
  std::size_t classes = 0;
  std::vector<float> x;            // count x length x variates
  std::vector<std::int32_t> y;     // count
  std::optional<std::vector<std::uint8_t>> mask;  // count x length
  std::string split = "all";
  nlohmann::json provenance = nlohmann::json::object();

  std::span<const float> series(std::size_t i) const {
    return {x.data() + i * length * variates, length * variates};
  }
  std::span<float> series(std::size_t i) {
    return {x.data() + i * length * variates, length * variates};
  }
  std::span<const std::uint8_t> mask_of(std::size_t i) const {
    return {mask->data() + i * length, length};
  }
  bool has_mask() const { return mask.has_value(); }

  /// Sample i as a float64 L x v matrix.
  Matrix sample(std::size_t i) const;

  /// Samples at the given indices, in order; keeps provenance.
  TimeSeriesDataset select(std::span<const std::size_t> indices) const;
  TimeSeriesDataset slice(std::size_t begin, std::size_t end) const;

  /// Throws Validation on broken invariants.
  void validate() const;

  friend bool operator==(const TimeSeriesDataset&, const TimeSeriesDataset&) = default;
};

// ---------------------------------------------------------------------------
// Generators. Every sample draws from its own stream seeded by
// (seed, sample index), so output is independent of `jobs`.

struct GeneratorSpec {
  std::string name;
  std::size_t count = 1000;
  std::uint64_t seed = 0;
  /// Generator-specific overrides; unknown keys are rejected.
  nlohmann::json parameters = nlohmann::json::object();
  std::size_t jobs = 1;
};

struct FreqSumParams {
  std::size_t length = 500;
  std::size_t variates = 6;
  std::size_t window = 100;
  double base_min_frequency = 2.0;
  double base_max_frequency = 5.0;
  double base_amplitude = 1.0;
  int min_frequency = 10;
  int max_frequency = 50;
  double signal_amplitude = 1.0;
  double square_probability = 0.5;
  double square_amplitude = 1.0;
  double noise = 0.0;
  int threshold = 60;
};

struct SeqCombParams {
  std::size_t length = 200;
  std::size_t variates = 1;
  std::size_t window = 20;
  double slope = 0.5;
  double noise = 1.0;
};

struct LowVarParams {
  std::size_t length = 200;
  std::size_t window = 20;
  double variance_ratio = 0.1;
  double shift = 2.0;
};

struct FarFieldParams {
  std::size_t length = 100;
  double min_frequency = 1.0;
  double max_frequency = 10.0;
  double eta = 0.01;
};

TimeSeriesDataset gen_freqsum(std::size_t count, std::uint64_t seed,
                              const FreqSumParams& params = {}, std::size_t jobs = 1);
TimeSeriesDataset gen_seqcomb(std::size_t count, std::uint64_t seed,
                              const SeqCombParams& params = {}, std::size_t jobs = 1);
TimeSeriesDataset gen_lowvar(std::size_t count, std::uint64_t seed,
                             const LowVarParams& params = {}, std::size_t jobs = 1);
TimeSeriesDataset gen_farfield(std::size_t count, std::uint64_t seed,
                               const FarFieldParams& params = {}, std::size_t jobs = 1);

/// Dispatches on spec.name: freqsum, seqcomb_uv, seqcomb_mv, lowvar, farfield.
TimeSeriesDataset generate(const GeneratorSpec& spec);

std::vector<std::string> generator_names();

/// Sum over j < L/2 of x[j] * x[L-1-j] for a univariate series.
double farfield_product(std::span<const float> series);

/// Recomputes the FreqSum label from the frequencies stored in provenance.
std::int32_t freqsum_label(int f1, int f2, int threshold);

// ---------------------------------------------------------------------------
// Directory format: meta.json, x.f32le, y.i32le and optionally g.u8.

void save(const TimeSeriesDataset& dataset, const std::filesystem::path& dir);
TimeSeriesDataset load(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// CSV import. Long layout: one row per (sample, time step) with a sample id
// column, a label column and one column per variate. Wide layout: one row
// per univariate sample, label first or in `label_column`, then L values.

struct CsvLayout {
  enum class Shape { Long, Wide };
  Shape shape = Shape::Wide;
  std::size_t length = 0;
  std::size_t variates = 1;
  std::string label_column = "label";
  std::string sample_column = "sample";          // long layout only
  std::vector<std::string> value_columns;        // long layout only
  std::optional<std::size_t> classes;            // inferred when absent
  bool header = true;
  char delimiter = ',';

  static CsvLayout from_json(const nlohmann::json& doc);
};

TimeSeriesDataset import_csv(const std::filesystem::path& path, const CsvLayout& layout);

}  // namespace timesliver::datasets
