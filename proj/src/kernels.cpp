#include "timesliver/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "timesliver/error.hpp"

namespace timesliver::kernels {

namespace {

void require(bool condition, ErrorKind kind, const char* what) {
  if (!condition) fail(kind, what);
}

}  // namespace

Matrix conv1d_forward(const Matrix& input, const Conv1dParams& params) {
  const std::size_t m = params.width();
  const std::size_t v = params.channels();
  const std::size_t q = params.filters();
  require(m >= 1, ErrorKind::InvalidConfig, "conv1d: kernel width must be >= 1");
  require(m <= input.rows, ErrorKind::InvalidConfig,
          "conv1d: kernel width exceeds sequence length");
  require(input.cols == v, ErrorKind::ShapeMismatch,
          "conv1d: input channels do not match kernels");
  require(params.bias.size() == q, ErrorKind::ShapeMismatch,
          "conv1d: bias length does not match filter count");

  const std::size_t segments = input.rows - m + 1;
  const std::size_t span = m * v;
  Matrix out(segments, q);
  for (std::size_t k = 0; k < segments; ++k) {
    // The window rows k..k+m-1 are contiguous in row-major storage.
    const double* window = input.data.data() + k * v;
    double* out_row = out.data.data() + k * q;
    for (std::size_t j = 0; j < q; ++j) {
      const double* kernel = params.kernels.data.data() + j * span;
      double acc = params.bias[j];
      for (std::size_t e = 0; e < span; ++e) acc += window[e] * kernel[e];
      out_row[j] = acc;
    }
  }
  return out;
}

Conv1dGrads conv1d_backward(const Matrix& grad_out, const Matrix& input,
                            const Conv1dParams& params, bool need_input_grad) {
  const std::size_t m = params.width();
  const std::size_t v = params.channels();
  const std::size_t q = params.filters();
  require(input.cols == v && m <= input.rows, ErrorKind::ShapeMismatch,
          "conv1d_backward: input does not match kernels");
  const std::size_t segments = input.rows - m + 1;
  require(grad_out.rows == segments && grad_out.cols == q,
          ErrorKind::ShapeMismatch,
          "conv1d_backward: grad_out shape does not match forward output");

  const std::size_t span = m * v;
  Conv1dGrads grads;
  grads.kernels = Tensor3(q, m, v);
  grads.bias.assign(q, 0.0);
  if (need_input_grad) grads.input = Matrix(input.rows, v);

  for (std::size_t k = 0; k < segments; ++k) {
    const double* window = input.data.data() + k * v;
    const double* g_row = grad_out.data.data() + k * q;
    double* gin_window =
        need_input_grad ? grads.input.data.data() + k * v : nullptr;
    for (std::size_t j = 0; j < q; ++j) {
      const double g = g_row[j];
      if (g == 0.0) continue;
      grads.bias[j] += g;
      double* gk = grads.kernels.data.data() + j * span;
      for (std::size_t e = 0; e < span; ++e) gk[e] += g * window[e];
      if (gin_window != nullptr) {
        const double* kernel = params.kernels.data.data() + j * span;
        for (std::size_t e = 0; e < span; ++e) gin_window[e] += g * kernel[e];
      }
    }
  }
  return grads;
}

std::vector<double> dense_forward(std::span<const double> features,
                                  const Matrix& weights,
                                  std::span<const double> bias) {
  require(weights.cols == features.size(), ErrorKind::ShapeMismatch,
          "dense: feature length does not match weight columns");
  require(bias.size() == weights.rows, ErrorKind::ShapeMismatch,
          "dense: bias length does not match weight rows");
  std::vector<double> out(weights.rows);
  for (std::size_t c = 0; c < weights.rows; ++c) {
    const auto w = weights.row(c);
    double acc = bias[c];
    for (std::size_t d = 0; d < features.size(); ++d) acc += w[d] * features[d];
    out[c] = acc;
  }
  return out;
}

DenseGrads dense_backward(std::span<const double> grad_out,
                          std::span<const double> features,
                          const Matrix& weights) {
  require(grad_out.size() == weights.rows && features.size() == weights.cols,
          ErrorKind::ShapeMismatch, "dense_backward: shape mismatch");
  DenseGrads grads;
  grads.features.assign(features.size(), 0.0);
  grads.weights = Matrix(weights.rows, weights.cols);
  grads.bias.assign(grad_out.begin(), grad_out.end());
  for (std::size_t c = 0; c < weights.rows; ++c) {
    const double g = grad_out[c];
    if (g == 0.0) continue;
    const auto w = weights.row(c);
    auto gw = grads.weights.row(c);
    for (std::size_t d = 0; d < features.size(); ++d) {
      gw[d] = g * features[d];
      grads.features[d] += g * w[d];
    }
  }
  return grads;
}

std::size_t pooled_extent(std::size_t extent, std::size_t window) {
  return (extent + window - 1) / window;
}

namespace {

void check_pool_args(const Matrix& input, std::size_t window) {
  require(window >= 1, ErrorKind::InvalidConfig, "pool: window must be >= 1");
  require(window <= input.rows && window <= input.cols,
          ErrorKind::InvalidConfig, "pool: window exceeds input dimensions");
}

}  // namespace

Matrix avgpool2d(const Matrix& input, std::size_t window) {
  check_pool_args(input, window);
  const std::size_t out_rows = pooled_extent(input.rows, window);
  const std::size_t out_cols = pooled_extent(input.cols, window);
  Matrix out(out_rows, out_cols);
  for (std::size_t r = 0; r < out_rows; ++r) {
    const std::size_t r0 = r * window;
    const std::size_t r1 = std::min(r0 + window, input.rows);
    for (std::size_t c = 0; c < out_cols; ++c) {
      const std::size_t c0 = c * window;
      const std::size_t c1 = std::min(c0 + window, input.cols);
      double acc = 0.0;
      for (std::size_t i = r0; i < r1; ++i)
        for (std::size_t j = c0; j < c1; ++j) acc += input(i, j);
      out(r, c) = acc / static_cast<double>((r1 - r0) * (c1 - c0));
    }
  }
  return out;
}

Matrix avgpool2d_backward(const Matrix& grad_out, std::size_t in_rows,
                          std::size_t in_cols, std::size_t window) {
  require(window >= 1, ErrorKind::InvalidConfig, "pool: window must be >= 1");
  require(grad_out.rows == pooled_extent(in_rows, window) &&
              grad_out.cols == pooled_extent(in_cols, window),
          ErrorKind::ShapeMismatch, "avgpool2d_backward: shape mismatch");
  Matrix grad_in(in_rows, in_cols);
  for (std::size_t r = 0; r < grad_out.rows; ++r) {
    const std::size_t r0 = r * window;
    const std::size_t r1 = std::min(r0 + window, in_rows);
    for (std::size_t c = 0; c < grad_out.cols; ++c) {
      const std::size_t c0 = c * window;
      const std::size_t c1 = std::min(c0 + window, in_cols);
      const double share =
          grad_out(r, c) / static_cast<double>((r1 - r0) * (c1 - c0));
      for (std::size_t i = r0; i < r1; ++i)
        for (std::size_t j = c0; j < c1; ++j) grad_in(i, j) += share;
    }
  }
  return grad_in;
}

MaxPoolResult maxpool2d(const Matrix& input, std::size_t window) {
  check_pool_args(input, window);
  const std::size_t out_rows = pooled_extent(input.rows, window);
  const std::size_t out_cols = pooled_extent(input.cols, window);
  MaxPoolResult result{Matrix(out_rows, out_cols), {}};
  result.argmax.resize(out_rows * out_cols);
  for (std::size_t r = 0; r < out_rows; ++r) {
    const std::size_t r0 = r * window;
    const std::size_t r1 = std::min(r0 + window, input.rows);
    for (std::size_t c = 0; c < out_cols; ++c) {
      const std::size_t c0 = c * window;
      const std::size_t c1 = std::min(c0 + window, input.cols);
      std::size_t best = r0 * input.cols + c0;
      double best_value = input.data[best];
      for (std::size_t i = r0; i < r1; ++i) {
        for (std::size_t j = c0; j < c1; ++j) {
          const std::size_t idx = i * input.cols + j;
          if (input.data[idx] > best_value) {
            best_value = input.data[idx];
            best = idx;
          }
        }
      }
      result.output(r, c) = best_value;
      result.argmax[r * out_cols + c] = best;
    }
  }
  return result;
}

Matrix maxpool2d_backward(const Matrix& grad_out,
                          std::span<const std::size_t> argmax,
                          std::size_t in_rows, std::size_t in_cols) {
  require(argmax.size() == grad_out.size(), ErrorKind::ShapeMismatch,
          "maxpool2d_backward: routing does not match grad_out");
  Matrix grad_in(in_rows, in_cols);
  for (std::size_t o = 0; o < argmax.size(); ++o) {
    require(argmax[o] < grad_in.size(), ErrorKind::OutOfRange,
            "maxpool2d_backward: routing index out of range");
    grad_in.data[argmax[o]] += grad_out.data[o];
  }
  return grad_in;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> probs(logits.size());
  if (logits.empty()) return probs;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - top);
    total += probs[c];
  }
  for (double& p : probs) p /= total;
  return probs;
}

LossAndGrad softmax_cross_entropy(std::span<const double> logits,
                                  std::size_t label) {
  require(logits.size() >= 2, ErrorKind::InvalidConfig,
          "softmax_cross_entropy: need at least two classes");
  require(label < logits.size(), ErrorKind::OutOfRange,
          "softmax_cross_entropy: label out of range");
  for (double z : logits) {
    if (!std::isfinite(z))
      fail(ErrorKind::NumericFailure, "softmax_cross_entropy: non-finite logit");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - top);
  const double log_norm = top + std::log(total);

  LossAndGrad out;
  out.loss = log_norm - logits[label];
  if (logits[label] == top) {
    // log1p keeps tiny losses from cancelling to 0 when the label dominates.
    double rest = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c)
      if (c != label) rest += std::exp(logits[c] - top);
    out.loss = std::log1p(rest);
  }
  out.grad.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c)
    out.grad[c] = std::exp(logits[c] - log_norm);
  out.grad[label] -= 1.0;
  return out;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state) {
  require(params.size() == grads.size() &&
              params.size() == state.first_moment.size() &&
              params.size() == state.second_moment.size(),
          ErrorKind::ShapeMismatch, "adam_step: parameter/state size mismatch");
  const AdamConfig& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale =
      std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return std::fabs(analytic - numeric) / scale;
}

GradCheckReport grad_check(const ScalarFn& fn, const GradientFn& gradient,
                           std::span<const double> params,
                           const GradCheckOptions& options) {
  std::vector<double> point(params.begin(), params.end());
  const std::vector<double> analytic = gradient(point);
  require(analytic.size() == point.size(), ErrorKind::ShapeMismatch,
          "grad_check: gradient length does not match parameters");

  std::vector<std::size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (coords.size() > options.probes) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.probes);
  }

  GradCheckReport report;
  for (std::size_t idx : coords) {
    const double saved = point[idx];
    point[idx] = saved + options.step;
    const double up = fn(point);
    point[idx] = saved - options.step;
    const double down = fn(point);
    point[idx] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double err =
        relative_error(analytic[idx], numeric, options.denominator_floor);
    if (report.probed == 0 || err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_index = idx;
    }
    ++report.probed;
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace timesliver::kernels
