#pragma once

// Differentiable building blocks with explicit forward/backward pairs.
// Everything is float64 and single-threaded; identical inputs give
// bit-identical outputs.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "timesliver/tensor.hpp"

namespace timesliver::kernels {

// ---------------------------------------------------------------------------
// 1D convolution, stride 1, no padding.

/// q filters of width m over v channels: kernels(j, l, c), bias[j].
struct Conv1dParams {
  Tensor3 kernels;
  std::vector<double> bias;

  std::size_t filters() const { return kernels.depth; }
  std::size_t width() const { return kernels.rows; }
  std::size_t channels() const { return kernels.cols; }

  friend bool operator==(const Conv1dParams&, const Conv1dParams&) = default;
};

/// input is L x v; returns (L - m + 1) x q.
Matrix conv1d_forward(const Matrix& input, const Conv1dParams& params);

struct Conv1dGrads {
  Matrix input;
  Tensor3 kernels;
  std::vector<double> bias;
};

/// Set `need_input_grad` to false to skip the transposed convolution when
/// the input is data rather than a learned quantity.
Conv1dGrads conv1d_backward(const Matrix& grad_out, const Matrix& input,
                            const Conv1dParams& params,
                            bool need_input_grad = true);

// ---------------------------------------------------------------------------
// Dense (affine) layer: y = W x + b with W of shape C x d.

std::vector<double> dense_forward(std::span<const double> features,
                                  const Matrix& weights,
                                  std::span<const double> bias);

struct DenseGrads {
  std::vector<double> features;
  Matrix weights;
  std::vector<double> bias;
};

DenseGrads dense_backward(std::span<const double> grad_out,
                          std::span<const double> features,
                          const Matrix& weights);

// ---------------------------------------------------------------------------
// 2D pooling with square window k and stride k. Trailing rows/cols that do
// not fill a window are pooled over the truncated window.

std::size_t pooled_extent(std::size_t extent, std::size_t window);

Matrix avgpool2d(const Matrix& input, std::size_t window);
Matrix avgpool2d_backward(const Matrix& grad_out, std::size_t in_rows,
                          std::size_t in_cols, std::size_t window);

struct MaxPoolResult {
  Matrix output;
  /// Flat input index of the selected element for every output cell.
  std::vector<std::size_t> argmax;
};

/// Ties resolve to the first index in row-major scan order of the window.
MaxPoolResult maxpool2d(const Matrix& input, std::size_t window);
Matrix maxpool2d_backward(const Matrix& grad_out,
                          std::span<const std::size_t> argmax,
                          std::size_t in_rows, std::size_t in_cols);

// ---------------------------------------------------------------------------
// Softmax cross-entropy on raw logits.

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

LossAndGrad softmax_cross_entropy(std::span<const double> logits,
                                  std::size_t label);

std::vector<double> softmax(std::span<const double> logits);

// ---------------------------------------------------------------------------
// Adam.

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t size, AdamConfig cfg)
      : config(cfg), first_moment(size, 0.0), second_moment(size, 0.0) {}
};

/// In-place update of `params`. Throws ShapeMismatch if sizes disagree.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.

struct GradCheckOptions {
  std::size_t probes = 64;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Relative error denominator floor, so exactly-zero gradients compare
  /// as absolute differences instead of dividing by zero.
  double denominator_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t probed = 0;
  bool passed = false;
};

using ScalarFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

/// Compares `gradient(params)` against central differences of `fn` on
/// randomly chosen coordinates (all coordinates when there are fewer than
/// `options.probes`).
GradCheckReport grad_check(const ScalarFn& fn, const GradientFn& gradient,
                           std::span<const double> params,
                           const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric, double floor = 1e-6);

}  // namespace timesliver::kernels
