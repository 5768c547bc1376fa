#include "timesliver/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "timesliver/error.hpp"

namespace timesliver::symbolic {

BinStrategy parse_bin_strategy(const std::string& name) {
  if (name == "quantile") return BinStrategy::Quantile;
  if (name == "uniform") return BinStrategy::Uniform;
  fail(ErrorKind::InvalidConfig, "unknown bin strategy '" + name + "'");
}

std::string to_string(BinStrategy strategy) {
  return strategy == BinStrategy::Quantile ? "quantile" : "uniform";
}

namespace {

void check_config(const DiscretizerConfig& config) {
  if (config.bins < 2) fail(ErrorKind::InvalidConfig, "bin count must be >= 2");
  if (config.bins > 65535)
    fail(ErrorKind::InvalidConfig, "bin count must fit in 16 bits");
  if (config.window != 1)
    fail(ErrorKind::InvalidConfig, "only compression window 1 is supported");
}

// Linear interpolation between order statistics at position p*(N-1).
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || lo == hi) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

template <typename T>
BinEdges fit_bins_impl(std::span<const T> values, std::size_t variates,
                       const DiscretizerConfig& config) {
  check_config(config);
  if (variates == 0) fail(ErrorKind::InvalidConfig, "variate count must be >= 1");
  if (values.empty()) fail(ErrorKind::InvalidConfig, "cannot fit bins on an empty set");
  if (values.size() % variates != 0)
    fail(ErrorKind::ShapeMismatch, "value count is not a multiple of the variate count");

  const std::size_t n = config.bins;
  const std::size_t rows = values.size() / variates;
  BinEdges result;
  result.bins = n;
  result.edges.resize(variates);
  std::vector<double> column(rows);
  for (std::size_t c = 0; c < variates; ++c) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double value = static_cast<double>(values[r * variates + c]);
      if (!std::isfinite(value))
        fail(ErrorKind::NumericFailure, "non-finite value in training data");
      column[r] = value;
    }
    auto& edges = result.edges[c];
    edges.resize(n - 1);
    if (config.strategy == BinStrategy::Quantile) {
      std::sort(column.begin(), column.end());
      for (std::size_t k = 1; k < n; ++k)
        edges[k - 1] = quantile_sorted(column, static_cast<double>(k) / static_cast<double>(n));
    } else {
      const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
      const double width = (*hi - *lo) / static_cast<double>(n);
      for (std::size_t k = 1; k < n; ++k)
        edges[k - 1] = *lo + width * static_cast<double>(k);
    }
  }
  return result;
}

}  // namespace

BinEdges fit_bins(std::span<const float> values, std::size_t variates,
                  const DiscretizerConfig& config) {
  return fit_bins_impl(values, variates, config);
}

BinEdges fit_bins(std::span<const double> values, std::size_t variates,
                  const DiscretizerConfig& config) {
  return fit_bins_impl(values, variates, config);
}

std::uint16_t symbol_of(double value, std::span<const double> edges) {
  // lower_bound finds the first edge >= value, i.e. counts edges < value.
  const auto below = std::lower_bound(edges.begin(), edges.end(), value) - edges.begin();
  return static_cast<std::uint16_t>(below + 1);
}

SymbolMatrix discretize(const Matrix& x, const BinEdges& edges) {
  if (x.cols != edges.variates())
    fail(ErrorKind::ShapeMismatch, "discretize: input variates do not match bin edges");
  SymbolMatrix s;
  s.length = x.rows;
  s.variates = x.cols;
  s.symbols.resize(x.rows * x.cols);
  for (std::size_t t = 0; t < x.rows; ++t)
    for (std::size_t c = 0; c < x.cols; ++c)
      s.symbols[t * x.cols + c] = symbol_of(x(t, c), edges.edges[c]);
  return s;
}

Matrix one_hot(const SymbolMatrix& symbols, std::size_t bins) {
  Matrix o(symbols.length, bins * symbols.variates);
  for (std::size_t t = 0; t < symbols.length; ++t) {
    for (std::size_t c = 0; c < symbols.variates; ++c) {
      const std::size_t s = symbols(t, c);
      if (s < 1 || s > bins)
        fail(ErrorKind::OutOfRange, "one_hot: symbol " + std::to_string(s) +
                                        " outside [1, " + std::to_string(bins) + "]");
      o(t, c * bins + s - 1) = 1.0;
    }
  }
  return o;
}

CompositionMatrix compose(const Matrix& one_hot, std::size_t segment) {
  if (segment == 0) fail(ErrorKind::InvalidConfig, "segment size must be >= 1");
  if (segment > one_hot.rows)
    fail(ErrorKind::InvalidConfig, "segment size exceeds sequence length");
  const std::size_t kappa = one_hot.rows - segment + 1;
  const double scale = 1.0 / static_cast<double>(segment);
  CompositionMatrix z{segment, Matrix(kappa, one_hot.cols)};
  for (std::size_t k = 0; k < kappa; ++k) {
    for (std::size_t j = 0; j < one_hot.cols; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < segment; ++l) acc += one_hot(k + l, j);
      z.values(k, j) = acc * scale;
    }
  }
  return z;
}

CompositionMatrix compose_symbols(const SymbolMatrix& symbols, std::size_t bins,
                                  std::size_t segment) {
  if (segment == 0) fail(ErrorKind::InvalidConfig, "segment size must be >= 1");
  if (segment > symbols.length)
    fail(ErrorKind::InvalidConfig, "segment size exceeds sequence length");
  const std::size_t width = bins * symbols.variates;
  const std::size_t kappa = symbols.length - segment + 1;
  std::vector<std::size_t> counts(width, 0);
  auto column = [&](std::size_t t, std::size_t c) -> std::size_t {
    const std::size_t s = symbols(t, c);
    if (s < 1 || s > bins) fail(ErrorKind::OutOfRange, "compose: symbol out of range");
    return c * bins + s - 1;
  };
  for (std::size_t t = 0; t < segment; ++t)
    for (std::size_t c = 0; c < symbols.variates; ++c) ++counts[column(t, c)];

  const double scale = 1.0 / static_cast<double>(segment);
  CompositionMatrix z{segment, Matrix(kappa, width)};
  for (std::size_t k = 0;; ++k) {
    for (std::size_t j = 0; j < width; ++j)
      z.values(k, j) = static_cast<double>(counts[j]) * scale;
    if (k + 1 == kappa) break;
    for (std::size_t c = 0; c < symbols.variates; ++c) {
      --counts[column(k, c)];
      ++counts[column(k + segment, c)];
    }
  }
  return z;
}

}  // namespace timesliver::symbolic
