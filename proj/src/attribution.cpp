#include "timesliver/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "timesliver/error.hpp"
#include "timesliver/parallel.hpp"

namespace timesliver::attribution {

std::string to_string(Gate g) {
  switch (g) {
    case Gate::Relu: return "relu";
    case Gate::Abs: return "abs";
    case Gate::Sigmoid: return "sigmoid";
    case Gate::Tanh: return "tanh";
    case Gate::Identity: return "identity";
  }
  return "relu";
}

std::string to_string(Reduction r) { return r == Reduction::Mean ? "mean" : "sum"; }

Gate parse_gate(const std::string& name) {
  if (name == "relu") return Gate::Relu;
  if (name == "abs") return Gate::Abs;
  if (name == "sigmoid") return Gate::Sigmoid;
  if (name == "tanh") return Gate::Tanh;
  if (name == "identity") return Gate::Identity;
  fail(ErrorKind::InvalidConfig, "unknown gate '" + name + "'");
}

Reduction parse_reduction(const std::string& name) {
  if (name == "mean") return Reduction::Mean;
  if (name == "sum") return Reduction::Sum;
  fail(ErrorKind::InvalidConfig, "unknown reduction '" + name + "'");
}

double apply_gate(Gate gate, double value) {
  switch (gate) {
    case Gate::Relu: return value > 0.0 ? value : 0.0;
    case Gate::Abs: return std::fabs(value);
    case Gate::Sigmoid: return 1.0 / (1.0 + std::exp(-value));
    case Gate::Tanh: return std::tanh(value);
    case Gate::Identity: return value;
  }
  return value;
}

void AttributionConfig::validate() const {
  if (!(epsilon > 0.0)) fail(ErrorKind::InvalidConfig, "epsilon must be > 0");
}

std::vector<Matrix> logit_gradients(const model::ModelParams& params,
                                    const model::ForwardTrace& trace, std::size_t target) {
  return model::logit_gradient_p(params, trace, target);
}

namespace {

double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

void check_shapes(const Matrix& g, const Matrix& z, const Matrix& q) {
  if (z.rows != q.rows || g.rows != z.cols || g.cols != q.cols)
    fail(ErrorKind::ShapeMismatch, "attribution: g, Z and Q shapes are inconsistent");
}

// Per-(i, j) denominators for zeta+ and zeta-.
void denominators(const Matrix& g, const Matrix& z, const Matrix& q,
                  const AttributionConfig& config, Matrix& den_plus, Matrix& den_minus) {
  den_plus = Matrix(g.rows, g.cols, 1.0);
  den_minus = Matrix(g.rows, g.cols, 1.0);
  if (!config.max_scaling) return;
  Matrix max_plus(g.rows, g.cols, -std::numeric_limits<double>::infinity());
  Matrix max_minus(g.rows, g.cols, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < z.rows; ++k) {
    const auto qk = q.row(k);
    for (std::size_t i = 0; i < z.cols; ++i) {
      const double zki = z(k, i);
      const auto gi = g.row(i);
      auto mp = max_plus.row(i);
      auto mm = max_minus.row(i);
      for (std::size_t j = 0; j < q.cols; ++j) {
        const double prod = sign(gi[j]) * zki * qk[j];
        mp[j] = std::max(mp[j], apply_gate(config.gate, prod));
        mm[j] = std::max(mm[j], apply_gate(config.gate, -prod));
      }
    }
  }
  for (std::size_t e = 0; e < g.size(); ++e) {
    den_plus.data[e] = max_plus.data[e] + config.epsilon;
    den_minus.data[e] = max_minus.data[e] + config.epsilon;
  }
}

}  // namespace

Contributions segment_contributions(const Matrix& g, const Matrix& z, const Matrix& q,
                                    const AttributionConfig& config) {
  check_shapes(g, z, q);
  config.validate();
  Matrix den_plus, den_minus;
  denominators(g, z, q, config, den_plus, den_minus);
  Contributions out{z.rows, g.rows, g.cols, {}, {}};
  out.plus.assign(z.rows * g.size(), 0.0);
  out.minus.assign(z.rows * g.size(), 0.0);
  for (std::size_t k = 0; k < z.rows; ++k) {
    for (std::size_t i = 0; i < g.rows; ++i) {
      for (std::size_t j = 0; j < g.cols; ++j) {
        const double gij = g(i, j);
        if (gij == 0.0) continue;
        const double prod = sign(gij) * z(k, i) * q(k, j);
        const std::size_t at = (k * g.rows + i) * g.cols + j;
        out.plus[at] = std::fabs(gij) * apply_gate(config.gate, prod) / den_plus(i, j);
        out.minus[at] = std::fabs(gij) * apply_gate(config.gate, -prod) / den_minus(i, j);
      }
    }
  }
  return out;
}

SegmentScores aggregate(const Contributions& zeta) {
  SegmentScores s{std::vector<double>(zeta.kappa, 0.0), std::vector<double>(zeta.kappa, 0.0)};
  const std::size_t block = zeta.rows * zeta.cols;
  for (std::size_t k = 0; k < zeta.kappa; ++k) {
    for (std::size_t e = 0; e < block; ++e) {
      s.plus[k] += zeta.plus[k * block + e];
      s.minus[k] += zeta.minus[k * block + e];
    }
  }
  return s;
}

SegmentScores segment_scores(const Matrix& g, const Matrix& z, const Matrix& q,
                             const AttributionConfig& config) {
  check_shapes(g, z, q);
  config.validate();
  Matrix den_plus, den_minus;
  denominators(g, z, q, config, den_plus, den_minus);
  // Fold |g| / denominator into one weight per (i, j).
  Matrix w_plus(g.rows, g.cols), w_minus(g.rows, g.cols), sg(g.rows, g.cols);
  for (std::size_t e = 0; e < g.size(); ++e) {
    sg.data[e] = sign(g.data[e]);
    w_plus.data[e] = std::fabs(g.data[e]) / den_plus.data[e];
    w_minus.data[e] = std::fabs(g.data[e]) / den_minus.data[e];
  }
  SegmentScores s{std::vector<double>(z.rows, 0.0), std::vector<double>(z.rows, 0.0)};
  for (std::size_t k = 0; k < z.rows; ++k) {
    const auto qk = q.row(k);
    double plus = 0.0;
    double minus = 0.0;
    for (std::size_t i = 0; i < g.rows; ++i) {
      const double zki = z(k, i);
      const auto sgi = sg.row(i);
      const auto wpi = w_plus.row(i);
      const auto wmi = w_minus.row(i);
      for (std::size_t j = 0; j < g.cols; ++j) {
        if (sgi[j] == 0.0) continue;
        const double prod = sgi[j] * zki * qk[j];
        plus += wpi[j] * apply_gate(config.gate, prod);
        minus += wmi[j] * apply_gate(config.gate, -prod);
      }
    }
    s.plus[k] = plus;
    s.minus[k] = minus;
  }
  return s;
}

std::vector<double> to_timepoints(std::span<const double> scores, std::size_t segment,
                                  std::size_t length, Reduction reduction) {
  if (segment == 0 || segment > length || scores.size() != length - segment + 1)
    fail(ErrorKind::ShapeMismatch, "to_timepoints: expected L - m + 1 segment scores");
  const std::size_t kappa = scores.size();
  std::vector<double> out(length, 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    const std::size_t k0 = t + 1 >= segment ? t + 1 - segment : 0;
    const std::size_t k1 = std::min(t, kappa - 1);
    double acc = 0.0;
    for (std::size_t k = k0; k <= k1; ++k) acc += scores[k];
    out[t] = reduction == Reduction::Mean ? acc / static_cast<double>(k1 - k0 + 1) : acc;
  }
  return out;
}

AttributionResult attribute(const Matrix& x, const model::ModelParams& params,
                            const AttributionConfig& config) {
  config.validate();
  const auto trace = model::forward(x, params, true);
  AttributionResult result;
  result.predicted = trace.predicted;
  result.target = config.target.value_or(trace.predicted);
  if (result.target >= params.classes) fail(ErrorKind::OutOfRange, "target class out of range");
  result.sample_dependent_gradient = params.config.pooling == model::Pooling::Max;
  result.phi_plus.assign(params.length, 0.0);
  result.phi_minus.assign(params.length, 0.0);

  auto grads = logit_gradients(params, trace, result.target);
  for (std::size_t l = 0; l < trace.slices.size(); ++l) {
    const auto& s = trace.slices[l];
    SliceAttribution slice;
    slice.segment = s.segment;
    slice.scores = segment_scores(grads[l], s.z, s.q, config);
    const auto plus = to_timepoints(slice.scores.plus, s.segment, params.length, config.reduction);
    const auto minus = to_timepoints(slice.scores.minus, s.segment, params.length, config.reduction);
    for (std::size_t t = 0; t < params.length; ++t) {
      result.phi_plus[t] += plus[t];
      result.phi_minus[t] += minus[t];
    }
    slice.gradient = std::move(grads[l]);
    result.slices.push_back(std::move(slice));
  }
  return result;
}

std::vector<AttributionResult> attribute_all(const datasets::TimeSeriesDataset& data,
                                             const model::ModelParams& params,
                                             const AttributionConfig& config, std::size_t jobs) {
  if (data.length != params.length || data.variates != params.variates)
    fail(ErrorKind::ShapeMismatch, "dataset shape does not match the model");
  std::vector<AttributionResult> out(data.count);
  parallel_for(data.count, jobs,
               [&](std::size_t i) { out[i] = attribute(data.sample(i), params, config); });
  return out;
}

void write_csv(std::ostream& out, std::span<const AttributionResult> results,
               std::size_t first_sample_id) {
  out << "sample_id,t,phi_plus,phi_minus,predicted_class\n";
  char buf[128];
  for (std::size_t s = 0; s < results.size(); ++s) {
    const auto& r = results[s];
    for (std::size_t t = 0; t < r.phi_plus.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%zu\n", first_sample_id + s, t,
                    r.phi_plus[t], r.phi_minus[t], r.predicted);
      out << buf;
    }
  }
}

AttributionTable read_csv(std::istream& in) {
  AttributionTable table;
  std::string line;
  // Leading '#' lines carry run metadata.
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
  }
  if (line.rfind("sample_id", 0) != 0)
    fail(ErrorKind::Parse, "attribution file lacks the expected header");
  std::size_t row = 1;
  std::size_t current = std::numeric_limits<std::size_t>::max();
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::size_t id = 0, t = 0, predicted = 0;
    double plus = 0.0, minus = 0.0;
    if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%lf,%zu", &id, &t, &plus, &minus, &predicted) != 5)
      fail(ErrorKind::Parse, "malformed attribution row " + std::to_string(row));
    if (id != current) {
      current = id;
      table.sample_ids.push_back(id);
      table.phi_plus.emplace_back();
      table.phi_minus.emplace_back();
      table.predicted.push_back(predicted);
    }
    if (t != table.phi_plus.back().size())
      fail(ErrorKind::Parse, "time index out of sequence at row " + std::to_string(row));
    table.phi_plus.back().push_back(plus);
    table.phi_minus.back().push_back(minus);
  }
  return table;
}

}  // namespace timesliver::attribution
