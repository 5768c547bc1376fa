#pragma once

// Positive/negative temporal attribution from the cross-representation:
// gradient-signed, gated and max-scaled contributions of every segment to
// every P entry, summed per segment and mapped back to time points.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "timesliver/model.hpp"
#include "timesliver/tensor.hpp"

namespace timesliver::attribution {

enum class Gate { Relu, Abs, Sigmoid, Tanh, Identity };
enum class Reduction { Mean, Sum };

std::string to_string(Gate g);
std::string to_string(Reduction r);
Gate parse_gate(const std::string& name);
Reduction parse_reduction(const std::string& name);

double apply_gate(Gate gate, double value);

struct AttributionConfig {
  double epsilon = 1e-18;
  bool max_scaling = true;
  Gate gate = Gate::Relu;
  Reduction reduction = Reduction::Mean;
  /// Explicit target class; the predicted class when empty.
  std::optional<std::size_t> target;

  void validate() const;
};

/// Dense zeta tensor, kappa x rows x cols.
struct Contributions {
  std::size_t kappa = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> plus;
  std::vector<double> minus;

  double plus_at(std::size_t k, std::size_t i, std::size_t j) const {
    return plus[(k * rows + i) * cols + j];
  }
  double minus_at(std::size_t k, std::size_t i, std::size_t j) const {
    return minus[(k * rows + i) * cols + j];
  }
};

struct SegmentScores {
  std::vector<double> plus;   // length kappa
  std::vector<double> minus;  // length kappa
};

struct SliceAttribution {
  std::size_t segment = 0;
  SegmentScores scores;
  Matrix gradient;  // d logit_c / d P, (n v) x q
};

struct AttributionResult {
  std::vector<double> phi_plus;   // length L
  std::vector<double> phi_minus;  // length L
  std::vector<SliceAttribution> slices;
  std::size_t target = 0;
  std::size_t predicted = 0;
  /// True under max pooling, where the gradient depends on the sample.
  bool sample_dependent_gradient = false;
};

/// d logit_target / d P for every segment slice.
std::vector<Matrix> logit_gradients(const model::ModelParams& params,
                                    const model::ForwardTrace& trace, std::size_t target);

/// zeta+ and zeta- as dense tensors (for inspection and tests).
Contributions segment_contributions(const Matrix& g, const Matrix& z, const Matrix& q,
                                    const AttributionConfig& config);

/// phi_k = sum over (i, j) of zeta_k.
SegmentScores aggregate(const Contributions& zeta);

/// aggregate(segment_contributions(...)) without materializing zeta.
SegmentScores segment_scores(const Matrix& g, const Matrix& z, const Matrix& q,
                             const AttributionConfig& config);

/// Time point t gets the mean (or sum) over segments k with k <= t <= k+m-1.
std::vector<double> to_timepoints(std::span<const double> segment_scores, std::size_t segment,
                                  std::size_t length, Reduction reduction);

AttributionResult attribute(const Matrix& x, const model::ModelParams& params,
                            const AttributionConfig& config = {});

/// Attributes every sample of `data`; result order follows sample order.
std::vector<AttributionResult> attribute_all(const datasets::TimeSeriesDataset& data,
                                             const model::ModelParams& params,
                                             const AttributionConfig& config = {},
                                             std::size_t jobs = 1);

/// Rows: sample_id,t,phi_plus,phi_minus,predicted_class.
void write_csv(std::ostream& out, std::span<const AttributionResult> results,
               std::size_t first_sample_id = 0);

/// Reads a file written by write_csv back into per-sample phi+ / phi-.
struct AttributionTable {
  std::vector<std::size_t> sample_ids;
  std::vector<std::vector<double>> phi_plus;
  std::vector<std::vector<double>> phi_minus;
  std::vector<std::size_t> predicted;
};
AttributionTable read_csv(std::istream& in);

}  // namespace timesliver::attribution
