#pragma once

// Segment latents Q (1D convolution + activation), cross-representation
// P = Z^T Q per segment size, pooled linear head, and training.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "timesliver/datasets.hpp"
#include "timesliver/kernels.hpp"
#include "timesliver/symbolic.hpp"
#include "timesliver/tensor.hpp"

namespace timesliver::model {

enum class Activation { Relu, Identity };
enum class Pooling { Avg, Max, None };
/// Symbolic uses the composition matrix Z; RawProjection replaces it with a
/// learned linear map of each raw segment to n*v dimensions (ablation).
enum class Representation { Symbolic, RawProjection };

std::string to_string(Activation a);
std::string to_string(Pooling p);
std::string to_string(Representation r);
Activation parse_activation(const std::string& name);
Pooling parse_pooling(const std::string& name);
Representation parse_representation(const std::string& name);

struct TimeSliverConfig {
  std::size_t bins = 10;
  std::size_t latent = 36;
  std::vector<std::size_t> segments{4};
  bool positional_encoding = false;
  /// Multiplies the position index inside the sinusoid. 1 gives the
  /// standard table; smaller values keep long univariate inputs unaliased.
  double position_scale = 1.0;
  Activation activation = Activation::Relu;
  Pooling pooling = Pooling::Avg;
  std::size_t pool_window = 2;
  Representation representation = Representation::Symbolic;
  symbolic::BinStrategy bin_strategy = symbolic::BinStrategy::Quantile;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig when the configuration cannot run on L x v input.
  void validate(std::size_t length, std::size_t variates) const;

  nlohmann::json to_json() const;
  /// Starts from `base` and overrides every key present in `doc`.
  static TimeSliverConfig from_json(const nlohmann::json& doc, TimeSliverConfig base);
  static TimeSliverConfig from_json(const nlohmann::json& doc);

  friend bool operator==(const TimeSliverConfig&, const TimeSliverConfig&) = default;
};

/// Shipped configurations per synthetic task: freqsum, seqcomb_uv,
/// seqcomb_mv, lowvar, farfield.
TimeSliverConfig preset(const std::string& name);
std::vector<std::string> preset_names();

struct ModelParams {
  TimeSliverConfig config;
  std::size_t length = 0;
  std::size_t variates = 0;
  std::size_t classes = 0;
  symbolic::BinEdges edges;
  std::vector<kernels::Conv1dParams> conv;        // one per segment size
  std::vector<kernels::Conv1dParams> projection;  // RawProjection only
  Matrix head;                                    // classes x feature_dim
  std::vector<double> head_bias;

  std::size_t symbol_width() const { return config.bins * variates; }
  /// Flattened size of one pooled P slice.
  std::size_t slice_features() const;
  std::size_t feature_dim() const { return slice_features() * config.segments.size(); }
  std::size_t parameter_count() const;

  /// Declared order: per segment size kernels then bias; projections (if
  /// any) in the same way; head weights row-major; head bias.
  std::vector<double> flatten() const;
  void assign(std::span<const double> values);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
ModelParams init_params(const TimeSliverConfig& config, std::size_t length,
                        std::size_t variates, std::size_t classes,
                        symbolic::BinEdges edges, std::uint64_t seed);

/// PE[t][c] = sin(a) for even c, cos(a) for odd c, with
/// a = scale * t / 10000^(2*floor(c/2)/v).
Matrix positional_encoding(std::size_t length, std::size_t variates, double scale = 1.0);

/// Everything about a sample that does not depend on learned weights.
struct EncodedSample {
  Matrix input;  // x plus positional encoding when enabled
  Matrix raw;    // x as given
  symbolic::SymbolMatrix symbols;
};

EncodedSample encode(const Matrix& x, const ModelParams& params);

/// Q for segment slice `slice`: activation(conv1d(x + PE)).
Matrix latent(const Matrix& x, const ModelParams& params, std::size_t slice);

/// P[i][j] = sum_k Z[k][i] Q[k][j].
Matrix cross_representation(const Matrix& z, const Matrix& q);

/// Same product computed from the symbol stream in O(L v q).
Matrix cross_representation(const symbolic::SymbolMatrix& symbols, std::size_t bins,
                            std::size_t segment, const Matrix& q);

struct SliceTrace {
  std::size_t segment = 0;
  Matrix z;    // kappa x (n v); empty when not requested
  Matrix pre;  // conv output before activation
  Matrix q;    // kappa x q
  Matrix p;    // (n v) x q
  Matrix pooled;
  std::vector<std::size_t> argmax;  // max pooling only
};

struct ForwardTrace {
  std::vector<SliceTrace> slices;
  std::vector<double> features;
  std::vector<double> logits;
  std::size_t predicted = 0;
};

ForwardTrace forward(const EncodedSample& sample, const ModelParams& params, bool keep_z = true);
ForwardTrace forward(const Matrix& x, const ModelParams& params, bool keep_z = true);

/// Pooled-flattened features and logits from given P slices, bypassing Q.
std::vector<double> head_logits(std::span<const Matrix> p_slices, const ModelParams& params);

/// Gradient of logit `target` with respect to every P slice. Routes through
/// the argmax recorded in `trace` under max pooling.
std::vector<Matrix> logit_gradient_p(const ModelParams& params, const ForwardTrace& trace,
                                     std::size_t target);

/// First index of the maximum.
std::size_t argmax(std::span<const double> values);

struct Prediction {
  std::size_t label = 0;
  std::vector<double> logits;
};

Prediction predict(const Matrix& x, const ModelParams& params);

/// Cross-entropy loss for one sample; adds its parameter gradient, scaled by
/// `weight`, into `grad` (flatten() order). Also returns the prediction.
struct SampleLoss {
  double loss = 0.0;
  std::size_t predicted = 0;
};
SampleLoss loss_and_gradient(const EncodedSample& sample, std::size_t label,
                             const ModelParams& params, std::span<double> grad,
                             double weight = 1.0);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;
  bool checkpoint = false;
};

struct TrainOptions {
  std::size_t jobs = 1;
  /// Called after every epoch (logging); may be empty.
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_valid_accuracy = 0.0;
  double best_valid_loss = 0.0;
  bool stopped_early = false;
};

/// Fits bins on `train`, then mini-batch Adam on mean cross-entropy. Keeps
/// the parameters with the best validation accuracy; equal accuracy with a
/// lower validation loss also counts as an improvement.
TrainResult train(const datasets::TimeSeriesDataset& train_set,
                  const datasets::TimeSeriesDataset& valid_set,
                  const TimeSliverConfig& config, const TrainOptions& options = {});

struct EvalStats {
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<std::size_t> predictions;
  std::vector<std::vector<double>> logits;
};

EvalStats evaluate(const ModelParams& params, const datasets::TimeSeriesDataset& data,
                   std::size_t jobs = 1);

}  // namespace timesliver::model
