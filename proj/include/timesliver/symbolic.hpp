#pragma once

// Per-variate discretization into n symbols, block one-hot expansion and
// the sliding-window composition matrix Z.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "timesliver/tensor.hpp"

namespace timesliver::symbolic {

enum class BinStrategy { Quantile, Uniform };

BinStrategy parse_bin_strategy(const std::string& name);
std::string to_string(BinStrategy strategy);

struct DiscretizerConfig {
  std::size_t bins = 10;
  /// Compression window; only 1 is supported.
  std::size_t window = 1;
  BinStrategy strategy = BinStrategy::Quantile;
};

/// One ascending list of n-1 edges per variate.
struct BinEdges {
  std::size_t bins = 0;
  std::vector<std::vector<double>> edges;

  std::size_t variates() const { return edges.size(); }

  friend bool operator==(const BinEdges&, const BinEdges&) = default;
};

/// Symbols in [1, n], stored row-major L x v.
struct SymbolMatrix {
  std::size_t length = 0;
  std::size_t variates = 0;
  std::vector<std::uint16_t> symbols;

  std::uint16_t operator()(std::size_t t, std::size_t c) const {
    return symbols[t * variates + c];
  }

  friend bool operator==(const SymbolMatrix&, const SymbolMatrix&) = default;
};

/// Z together with the segment size it was built for.
struct CompositionMatrix {
  std::size_t segment = 0;
  Matrix values;  // kappa x (n * v)
};

/// Fits edges on row-major values laid out as (..., variates); every
/// variate pools all of its values. Quantile edges sit at the k/n empirical
/// quantiles with linear interpolation between order statistics; uniform
/// edges split [min, max] into n equal-width intervals.
BinEdges fit_bins(std::span<const float> values, std::size_t variates,
                  const DiscretizerConfig& config);
BinEdges fit_bins(std::span<const double> values, std::size_t variates,
                  const DiscretizerConfig& config);

/// Symbol = 1 + number of edges strictly below the value.
std::uint16_t symbol_of(double value, std::span<const double> edges);

SymbolMatrix discretize(const Matrix& x, const BinEdges& edges);

/// L x (n * v) block one-hot; throws OutOfRange on a symbol outside [1, n].
Matrix one_hot(const SymbolMatrix& symbols, std::size_t bins);

/// Sliding mean of the one-hot rows with window m, stride 1.
CompositionMatrix compose(const Matrix& one_hot, std::size_t segment);

/// Same result as compose(one_hot(symbols, n), m) without materializing O.
/// Window counts are accumulated as integers so the output depends only on
/// the symbol stream.
CompositionMatrix compose_symbols(const SymbolMatrix& symbols, std::size_t bins,
                                  std::size_t segment);

}  // namespace timesliver::symbolic
