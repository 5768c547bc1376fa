#include "timesliver/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "timesliver/error.hpp"
#include "timesliver/parallel.hpp"
#include "timesliver/random.hpp"

namespace timesliver::eval {

using nlohmann::json;

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mu = mean(values);
  double acc = 0.0;
  for (const double v : values) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

std::optional<double> auprc(std::span<const double> scores, std::span<const std::uint8_t> mask) {
  if (scores.size() != mask.size())
    fail(ErrorKind::ShapeMismatch, "auprc: scores and mask differ in length");
  const std::size_t positives =
      static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto g) { return g != 0; }));
  if (positives == 0) return std::nullopt;

  const std::vector<double> probs = kernels::softmax(scores);
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

  double area = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  const double npos = static_cast<double>(positives);
  for (std::size_t at = 0; at < order.size();) {
    // Consume every point tied at this threshold before scoring it.
    const double threshold = probs[order[at]];
    while (at < order.size() && probs[order[at]] == threshold) {
      tp += mask[order[at]] != 0 ? 1 : 0;
      ++seen;
      ++at;
    }
    const double recall = static_cast<double>(tp) / npos;
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

AuprcSummary auprc_dataset(const Scores& scores, const datasets::TimeSeriesDataset& data) {
  if (!data.has_mask()) fail(ErrorKind::Validation, "dataset has no ground-truth masks");
  if (scores.size() != data.count)
    fail(ErrorKind::ShapeMismatch, "auprc: one score vector per sample is required");
  AuprcSummary s;
  std::vector<double> valid;
  for (std::size_t i = 0; i < data.count; ++i) {
    if (scores[i].size() != data.length)
      fail(ErrorKind::ShapeMismatch, "auprc: score length does not match L");
    const auto a = auprc(scores[i], data.mask_of(i));
    if (a) {
      s.per_sample.push_back(*a);
      valid.push_back(*a);
    } else {
      s.per_sample.push_back(std::numeric_limits<double>::quiet_NaN());
      ++s.skipped;
    }
  }
  s.scored = valid.size();
  s.mean = mean(valid);
  s.stddev = stddev(valid);
  return s;
}

std::size_t mask_count(double percent, std::size_t length) {
  if (!(percent >= 0.0) || percent > 100.0)
    fail(ErrorKind::OutOfRange, "mask percentage must be within [0, 100]");
  if (percent == 0.0) return 0;
  // Guard against 0.1 * 300 / 100 style representation error before ceil.
  const double exact = percent * static_cast<double>(length) / 100.0;
  const double rounded = std::round(exact);
  const double count = std::fabs(exact - rounded) < 1e-9 ? rounded : std::ceil(exact);
  return std::clamp<std::size_t>(static_cast<std::size_t>(count), 1, length);
}

std::vector<std::size_t> rank_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

namespace {

void zero_points(std::span<float> series, std::size_t variates,
                 std::span<const std::size_t> points) {
  for (const auto t : points)
    for (std::size_t c = 0; c < variates; ++c) series[t * variates + c] = 0.0F;
}

}  // namespace

datasets::TimeSeriesDataset mask_top(const datasets::TimeSeriesDataset& data, const Scores& scores,
                                     double percent, MaskDirection direction) {
  if (scores.size() != data.count)
    fail(ErrorKind::ShapeMismatch, "mask_top: one score vector per sample is required");
  if (direction == MaskDirection::KeepTop && !(percent > 0.0))
    fail(ErrorKind::OutOfRange, "keep-top percentage must be > 0");
  const std::size_t n = mask_count(percent, data.length);
  datasets::TimeSeriesDataset out = data;
  for (std::size_t i = 0; i < data.count; ++i) {
    if (scores[i].size() != data.length)
      fail(ErrorKind::ShapeMismatch, "mask_top: score length does not match L");
    const auto order = rank_descending(scores[i]);
    const auto top = std::span<const std::size_t>(order).first(n);
    const auto rest = std::span<const std::size_t>(order).subspan(n);
    zero_points(out.series(i), data.variates, direction == MaskDirection::KeepTop ? rest : top);
  }
  return out;
}

double integrate(std::span<const double> grid, std::span<const double> values, double e0,
                 double upper) {
  if (grid.size() != values.size())
    fail(ErrorKind::ShapeMismatch, "integrate: grid and values differ in length");
  double area = 0.0;
  double prev_u = 0.0;
  double prev_e = e0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double u = grid[k];
    const double e = values[k];
    if (u <= prev_u) fail(ErrorKind::InvalidConfig, "integration grid must be increasing");
    if (u >= upper) {
      const double e_upper = prev_e + (e - prev_e) * (upper - prev_u) / (u - prev_u);
      area += 0.5 * (prev_e + e_upper) * (upper - prev_u);
      return area;
    }
    area += 0.5 * (prev_e + e) * (u - prev_u);
    prev_u = u;
    prev_e = e;
  }
  // Grid ends before `upper`: hold the last value.
  area += prev_e * (upper - prev_u);
  return area;
}

std::vector<double> default_grid() { return {1, 2, 5, 10, 15, 20, 30, 40, 50, 75, 100}; }

json OcclusionReport::to_json() const {
  json pts = json::array();
  for (const auto& p : points)
    pts.push_back({{"u", p.u},
                   {"accuracies", p.accuracies},
                   {"seeds", p.seeds},
                   {"epochs", p.epochs},
                   {"mean", p.mean},
                   {"std", p.stddev},
                   {"missing", p.missing}});
  return {{"e0", e0}, {"I100", i100}, {"I20", i20}, {"points", pts}, {"warnings", warnings}};
}

OcclusionReport occlusion_curve(const datasets::TimeSeriesDataset& train_set,
                                const datasets::TimeSeriesDataset& valid_set,
                                const datasets::TimeSeriesDataset& test_set,
                                const SplitScores& scores, const model::TimeSliverConfig& config,
                                const OcclusionOptions& options) {
  const auto& grid = options.grid;
  if (grid.empty()) fail(ErrorKind::InvalidConfig, "occlusion grid is empty");
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (!(grid[k] > 0.0) || grid[k] > 100.0 || (k > 0 && grid[k] <= grid[k - 1]))
      fail(ErrorKind::InvalidConfig, "occlusion grid must be strictly increasing in (0, 100]");
  if (options.trials == 0) fail(ErrorKind::InvalidConfig, "at least one trial is required");

  OcclusionReport report;
  // Majority class of the training labels, scored on the test split.
  std::map<std::int32_t, std::size_t> counts;
  for (const auto y : train_set.y) ++counts[y];
  std::int32_t majority = 0;
  std::size_t best = 0;
  for (const auto& [label, n] : counts)
    if (n > best) {
      best = n;
      majority = label;
    }
  report.e0 = test_set.count == 0
                  ? 0.0
                  : static_cast<double>(std::count(test_set.y.begin(), test_set.y.end(), majority)) /
                        static_cast<double>(test_set.count);

  const std::size_t jobs_total = grid.size() * options.trials;
  struct Outcome {
    double accuracy = 0.0;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    std::string error;
  };
  std::vector<Outcome> outcomes(jobs_total);
  parallel_for(jobs_total, options.jobs, [&](std::size_t job) {
    const std::size_t ui = job / options.trials;
    const std::size_t trial = job % options.trials;
    model::TimeSliverConfig cfg = config;
    cfg.seed = stream_seed(options.seed, ui * 1009 + trial) >> 1;
    Outcome& out = outcomes[job];
    out.seed = cfg.seed;
    try {
      const auto tr = mask_top(train_set, scores.train, grid[ui], MaskDirection::KeepTop);
      const auto va = mask_top(valid_set, scores.valid, grid[ui], MaskDirection::KeepTop);
      const auto te = mask_top(test_set, scores.test, grid[ui], MaskDirection::KeepTop);
      const auto fit = model::train(tr, va, cfg);
      out.accuracy = model::evaluate(fit.params, te).accuracy;
      out.epochs = fit.history.size();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NumericFailure) throw;
      out.error = e.what();
    }
    if (options.log)
      options.log("u=" + std::to_string(grid[ui]) + " trial " + std::to_string(trial) +
                  (out.error.empty() ? " accuracy " + std::to_string(out.accuracy)
                                     : " failed: " + out.error));
  });

  std::vector<double> us, es;
  for (std::size_t ui = 0; ui < grid.size(); ++ui) {
    OcclusionPoint p;
    p.u = grid[ui];
    for (std::size_t trial = 0; trial < options.trials; ++trial) {
      const auto& o = outcomes[ui * options.trials + trial];
      if (!o.error.empty()) {
        report.warnings.push_back("u=" + std::to_string(p.u) + ": " + o.error);
        continue;
      }
      p.accuracies.push_back(o.accuracy);
      p.seeds.push_back(o.seed);
      p.epochs.push_back(o.epochs);
    }
    p.missing = p.accuracies.empty();
    if (!p.missing) {
      p.mean = mean(p.accuracies);
      p.stddev = stddev(p.accuracies);
      us.push_back(p.u);
      es.push_back(p.mean);
    }
    report.points.push_back(std::move(p));
  }
  if (us.size() < grid.size())
    report.warnings.push_back("integration skips grid points whose retraining diverged");
  report.i100 = integrate(us, es, report.e0, 100.0);
  report.i20 = integrate(us, es, report.e0, 20.0);
  return report;
}

void write_occlusion_table(std::ostream& out, const OcclusionReport& report) {
  out << "u,mean_e,std_e\n";
  out << "0," << report.e0 << ",0\n";
  for (const auto& p : report.points) {
    if (p.missing) {
      out << p.u << ",nan,nan\n";
    } else {
      out << p.u << ',' << p.mean << ',' << p.stddev << '\n';
    }
  }
}

json NegMaskReport::to_json() const {
  json out = {{"levels", json::array()}};
  for (const auto& l : levels)
    out["levels"].push_back({{"percent", l.percent},
                   {"mean", l.mean},
                   {"std", l.stddev},
                   {"fallbacks", l.fallbacks},
                   {"samples", l.deltas.size()}});
  return out;
}

NegMaskReport delta_logit_neg(const model::ModelParams& params,
                              const datasets::TimeSeriesDataset& test_set,
                              const Scores& phi_plus, const Scores& phi_minus,
                              std::span<const double> percents, std::size_t jobs) {
  if (phi_plus.size() != test_set.count || phi_minus.size() != test_set.count)
    fail(ErrorKind::ShapeMismatch, "negmask: one attribution per test sample is required");
  NegMaskReport report;
  for (const double percent : percents) {
    NegMaskLevel level;
    level.percent = percent;
    level.deltas.assign(test_set.count, 0.0);
    std::vector<std::uint8_t> fallback(test_set.count, 0);
    const std::size_t n = mask_count(percent, test_set.length);
    parallel_for(test_set.count, jobs, [&](std::size_t i) {
      const Matrix x = test_set.sample(i);
      const auto base = model::forward(x, params, false);
      const auto& neg = phi_minus[i];
      const bool all_zero = std::all_of(neg.begin(), neg.end(), [](double v) { return v == 0.0; });
      std::vector<std::size_t> order;
      if (all_zero) {
        // Lowest phi+ first: rank the negated scores.
        std::vector<double> flipped(phi_plus[i].size());
        for (std::size_t t = 0; t < flipped.size(); ++t) flipped[t] = -phi_plus[i][t];
        order = rank_descending(flipped);
        fallback[i] = 1;
      } else {
        order = rank_descending(neg);
      }
      Matrix masked = x;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < masked.cols; ++c) masked(order[r], c) = 0.0;
      const auto after = model::forward(masked, params, false);
      level.deltas[i] = after.logits[base.predicted] - base.logits[base.predicted];
    });
    level.fallbacks = static_cast<std::size_t>(std::count(fallback.begin(), fallback.end(), 1));
    level.mean = mean(level.deltas);
    level.stddev = stddev(level.deltas);
    report.levels.push_back(std::move(level));
  }
  return report;
}

Scores random_scores(std::uint64_t seed, const datasets::TimeSeriesDataset& data) {
  Scores out(data.count, std::vector<double>(data.length));
  for (std::size_t i = 0; i < data.count; ++i) {
    Rng rng(seed, i);
    for (double& s : out[i]) s = rng.uniform();
  }
  return out;
}

}  // namespace timesliver::eval
