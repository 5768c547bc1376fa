#pragma once

// Randomized property constructions shared by the unit tests and the
// acceptance run. Each returns the worst deviation over its instance.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "oracles.hpp"
#include "timesliver/attribution.hpp"
#include "timesliver/model.hpp"
#include "timesliver/symbolic.hpp"

namespace props {

using namespace timesliver;

inline model::ModelParams random_model(model::TimeSliverConfig cfg, std::size_t L, std::size_t v,
                                       std::size_t C, std::uint64_t seed) {
  const auto sample = oracle::random_matrix(L * 3, v, seed ^ 0xabcdef, -2.0, 2.0);
  auto edges = symbolic::fit_bins(sample.data, v, {cfg.bins, 1, cfg.bin_strategy});
  return model::init_params(cfg, L, v, C, std::move(edges), seed);
}

struct Completeness {
  double error = 0.0;      // |sum_k (phi+ - phi-) - y_c|
  double tolerance = 0.0;  // 1e-6 * max(1, |y_c|)
};

// Linear head, no bias, no max-scaling, pooling none, one segment size and a
// ReLU latent, so every Z_ki Q_kj is >= 0 and shares the sign of sigma_ij.
inline Completeness completeness_instance(std::uint64_t seed) {
  Rng rng(seed, 0xc0);
  model::TimeSliverConfig cfg;
  cfg.bins = static_cast<std::size_t>(rng.integer(2, 8));
  cfg.latent = static_cast<std::size_t>(rng.integer(1, 6));
  cfg.segments = {static_cast<std::size_t>(rng.integer(1, 6))};
  cfg.pooling = model::Pooling::None;
  const std::size_t L = static_cast<std::size_t>(rng.integer(8, 40));
  const std::size_t v = static_cast<std::size_t>(rng.integer(1, 3));
  const std::size_t C = static_cast<std::size_t>(rng.integer(2, 4));
  auto p = random_model(cfg, L, v, C, seed);
  std::fill(p.head_bias.begin(), p.head_bias.end(), 0.0);
  const auto x = oracle::random_matrix(L, v, seed + 17, -2.0, 2.0);

  attribution::AttributionConfig ac;
  ac.max_scaling = false;
  ac.target = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(C) - 1));
  const auto r = attribution::attribute(x, p, ac);
  const double y = model::forward(x, p).logits[*ac.target];
  double total = 0.0;
  for (const auto& s : r.slices)
    for (std::size_t k = 0; k < s.scores.plus.size(); ++k) total += s.scores.plus[k] - s.scores.minus[k];
  return {std::fabs(total - y), 1e-6 * std::max(1.0, std::fabs(y))};
}

// Two identical length-m segments at non-overlapping positions must get
// identical per-segment scores.
inline double symmetry_instance(std::uint64_t seed) {
  Rng rng(seed, 0x5e);
  model::TimeSliverConfig cfg;
  cfg.bins = static_cast<std::size_t>(rng.integer(3, 10));
  cfg.latent = static_cast<std::size_t>(rng.integer(2, 8));
  const std::size_t m = static_cast<std::size_t>(rng.integer(2, 7));
  cfg.segments = {m};
  cfg.pooling = rng.bernoulli(0.5) ? model::Pooling::Avg : model::Pooling::None;
  const std::size_t L = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(3 * m), 60));
  const std::size_t v = static_cast<std::size_t>(rng.integer(1, 3));
  const auto p = random_model(cfg, L, v, 3, seed);
  auto x = oracle::random_matrix(L, v, seed + 29, -2.0, 2.0);
  const std::size_t a = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(L - 2 * m)));
  const std::size_t b = static_cast<std::size_t>(
      rng.integer(static_cast<std::int64_t>(a + m), static_cast<std::int64_t>(L - m)));
  for (std::size_t l = 0; l < m; ++l)
    for (std::size_t c = 0; c < v; ++c) x(b + l, c) = x(a + l, c);

  const auto r = attribution::attribute(x, p);
  const auto& s = r.slices[0].scores;
  return std::max(std::fabs(s.plus[a] - s.plus[b]), std::fabs(s.minus[a] - s.minus[b]));
}

// Strictly increasing per-variate transform applied to the training corpus
// (before quantile fitting) and to the input; Z must not change by a bit.
// Inputs are drawn from the corpus so every value is an order statistic.
inline bool scale_invariance_instance(std::uint64_t seed) {
  Rng rng(seed, 0x51);
  const std::size_t v = static_cast<std::size_t>(rng.integer(1, 4));
  const std::size_t L = 40, N = 12;
  const std::size_t n = static_cast<std::size_t>(rng.integer(2, 20));
  const std::size_t m = static_cast<std::size_t>(rng.integer(1, 8));
  const auto corpus = oracle::random_matrix(N * L, v, seed + 5, -3.0, 3.0);

  std::vector<int> kind(v);
  std::vector<double> scale(v), shift(v);
  for (std::size_t c = 0; c < v; ++c) {
    kind[c] = static_cast<int>(rng.integer(0, 3));
    scale[c] = rng.uniform(0.01, 100.0);
    shift[c] = rng.uniform(-50.0, 50.0);
  }
  auto transform = [&](double x, std::size_t c) {
    switch (kind[c]) {
      case 0: return scale[c] * x + shift[c];
      case 1: return std::exp(x);
      case 2: return x * x * x + x;
      default: return std::atan(x) * scale[c];
    }
  };
  Matrix moved = corpus;
  for (std::size_t t = 0; t < moved.rows; ++t)
    for (std::size_t c = 0; c < v; ++c) moved(t, c) = transform(corpus(t, c), c);

  const symbolic::DiscretizerConfig cfg{n, 1, symbolic::BinStrategy::Quantile};
  const auto e0 = symbolic::fit_bins(corpus.data, v, cfg);
  const auto e1 = symbolic::fit_bins(moved.data, v, cfg);
  const std::size_t pick = static_cast<std::size_t>(rng.integer(0, N - 1));
  Matrix x0(L, v), x1(L, v);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t c = 0; c < v; ++c) {
      x0(t, c) = corpus(pick * L + t, c);
      x1(t, c) = moved(pick * L + t, c);
    }
  const auto z0 = symbolic::compose(symbolic::one_hot(symbolic::discretize(x0, e0), n), m);
  const auto z1 = symbolic::compose(symbolic::one_hot(symbolic::discretize(x1, e1), n), m);
  return z0.values == z1.values;
}

}  // namespace props
