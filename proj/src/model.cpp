#include "timesliver/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "timesliver/error.hpp"
#include "timesliver/parallel.hpp"
#include "timesliver/random.hpp"

namespace timesliver::model {

using nlohmann::json;

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "identity"; }

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::Avg: return "avg";
    case Pooling::Max: return "max";
    case Pooling::None: return "none";
  }
  return "avg";
}

std::string to_string(Representation r) {
  return r == Representation::Symbolic ? "symbolic" : "raw_projection";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  fail(ErrorKind::InvalidConfig, "unknown activation '" + name + "'");
}

Pooling parse_pooling(const std::string& name) {
  if (name == "avg") return Pooling::Avg;
  if (name == "max") return Pooling::Max;
  if (name == "none") return Pooling::None;
  fail(ErrorKind::InvalidConfig, "unknown pooling '" + name + "'");
}

Representation parse_representation(const std::string& name) {
  if (name == "symbolic") return Representation::Symbolic;
  if (name == "raw_projection" || name == "raw_z") return Representation::RawProjection;
  fail(ErrorKind::InvalidConfig, "unknown representation '" + name + "'");
}

// ---------------------------------------------------------------------------
// Configuration

void TimeSliverConfig::validate(std::size_t length, std::size_t variates) const {
  auto bad = [](const std::string& what) { fail(ErrorKind::InvalidConfig, what); };
  if (bins < 2) bad("bins must be >= 2");
  if (latent < 1) bad("latent dimension must be >= 1");
  if (segments.empty()) bad("at least one segment size is required");
  if (variates < 1) bad("input needs at least one variate");
  for (const auto m : segments) {
    if (m < 1) bad("segment sizes must be >= 1");
    if (m > length)
      bad("segment size " + std::to_string(m) + " exceeds sequence length " +
          std::to_string(length));
  }
  if (pooling != Pooling::None) {
    if (pool_window < 1) bad("pool window must be >= 1");
    if (pool_window > bins * variates || pool_window > latent)
      bad("pool window exceeds the cross-representation shape");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning rate must be > 0");
  if (batch_size < 1) bad("batch size must be >= 1");
  if (!std::isfinite(position_scale)) bad("position scale must be finite");
}

json TimeSliverConfig::to_json() const {
  return {{"bins", bins},
          {"latent", latent},
          {"segments", segments},
          {"positional_encoding", positional_encoding},
          {"position_scale", position_scale},
          {"activation", model::to_string(activation)},
          {"pooling", model::to_string(pooling)},
          {"pool_window", pool_window},
          {"representation", model::to_string(representation)},
          {"bin_strategy", symbolic::to_string(bin_strategy)},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"seed", seed}};
}

TimeSliverConfig TimeSliverConfig::from_json(const json& doc, TimeSliverConfig c) {
  if (!doc.is_object()) fail(ErrorKind::InvalidConfig, "model config must be a JSON object");
  static const std::vector<std::string> known = {
      "bins", "latent", "segments", "positional_encoding", "position_scale", "activation",
      "pooling", "pool_window", "representation", "bin_strategy", "learning_rate",
      "batch_size", "max_epochs", "patience", "seed"};
  for (const auto& [key, _] : doc.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      fail(ErrorKind::InvalidConfig, "unknown model config key '" + key + "'");
  try {
    if (doc.contains("bins")) c.bins = doc["bins"].get<std::size_t>();
    if (doc.contains("latent")) c.latent = doc["latent"].get<std::size_t>();
    if (doc.contains("segments")) {
      const auto& s = doc["segments"];
      c.segments = s.is_array() ? s.get<std::vector<std::size_t>>()
                                : std::vector<std::size_t>{s.get<std::size_t>()};
    }
    if (doc.contains("positional_encoding"))
      c.positional_encoding = doc["positional_encoding"].get<bool>();
    if (doc.contains("position_scale")) c.position_scale = doc["position_scale"].get<double>();
    if (doc.contains("activation")) c.activation = parse_activation(doc["activation"]);
    if (doc.contains("pooling")) c.pooling = parse_pooling(doc["pooling"]);
    if (doc.contains("pool_window")) c.pool_window = doc["pool_window"].get<std::size_t>();
    if (doc.contains("representation"))
      c.representation = parse_representation(doc["representation"]);
    if (doc.contains("bin_strategy"))
      c.bin_strategy = symbolic::parse_bin_strategy(doc["bin_strategy"]);
    if (doc.contains("learning_rate")) c.learning_rate = doc["learning_rate"].get<double>();
    if (doc.contains("batch_size")) c.batch_size = doc["batch_size"].get<std::size_t>();
    if (doc.contains("max_epochs")) c.max_epochs = doc["max_epochs"].get<std::size_t>();
    if (doc.contains("patience")) c.patience = doc["patience"].get<std::size_t>();
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("model config: ") + e.what());
  }
  return c;
}

TimeSliverConfig TimeSliverConfig::from_json(const json& doc) {
  return from_json(doc, TimeSliverConfig{});
}

std::vector<std::string> preset_names() {
  return {"freqsum", "seqcomb_uv", "seqcomb_mv", "lowvar", "farfield"};
}

TimeSliverConfig preset(const std::string& name) {
  TimeSliverConfig c;
  c.latent = 36;
  if (name == "freqsum") {
    c.bins = 15;
    c.segments = {7};
    c.learning_rate = 3e-3;
  } else if (name == "seqcomb_uv") {
    c.bins = 20;
    c.segments = {4, 7};
    c.positional_encoding = true;
    // With one channel the table is sin(t), which repeats every 2 pi steps.
    // A quarter period over the 200-step series keeps position monotone.
    c.position_scale = std::numbers::pi / 400.0;
  } else if (name == "seqcomb_mv") {
    c.bins = 10;
    c.segments = {4, 7};
    c.positional_encoding = true;
    c.position_scale = std::numbers::pi / 400.0;
  } else if (name == "lowvar") {
    c.bins = 20;
    c.segments = {4};
  } else if (name == "farfield") {
    c.bins = 20;
    c.segments = {5};
    c.positional_encoding = true;
  } else {
    fail(ErrorKind::InvalidConfig, "unknown preset '" + name + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

std::size_t ModelParams::slice_features() const {
  const std::size_t rows = symbol_width();
  const std::size_t cols = config.latent;
  if (config.pooling == Pooling::None) return rows * cols;
  return kernels::pooled_extent(rows, config.pool_window) *
         kernels::pooled_extent(cols, config.pool_window);
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = head.size() + head_bias.size();
  for (const auto& c : conv) total += c.kernels.size() + c.bias.size();
  for (const auto& p : projection) total += p.kernels.size() + p.bias.size();
  return total;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  auto put = [&](const std::vector<double>& v) { out.insert(out.end(), v.begin(), v.end()); };
  for (const auto& c : conv) {
    put(c.kernels.data);
    put(c.bias);
  }
  for (const auto& p : projection) {
    put(p.kernels.data);
    put(p.bias);
  }
  put(head.data);
  put(head_bias);
  return out;
}

void ModelParams::assign(std::span<const double> values) {
  if (values.size() != parameter_count())
    fail(ErrorKind::ShapeMismatch, "parameter vector has " + std::to_string(values.size()) +
                                       " entries, model expects " +
                                       std::to_string(parameter_count()));
  std::size_t at = 0;
  auto take = [&](std::vector<double>& v) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(at), v.size(), v.begin());
    at += v.size();
  };
  for (auto& c : conv) {
    take(c.kernels.data);
    take(c.bias);
  }
  for (auto& p : projection) {
    take(p.kernels.data);
    take(p.bias);
  }
  take(head.data);
  take(head_bias);
}

ModelParams init_params(const TimeSliverConfig& config, std::size_t length,
                        std::size_t variates, std::size_t classes, symbolic::BinEdges edges,
                        std::uint64_t seed) {
  config.validate(length, variates);
  if (classes < 2) fail(ErrorKind::InvalidConfig, "at least two classes are required");
  if (edges.variates() != variates || edges.bins != config.bins)
    fail(ErrorKind::ShapeMismatch, "bin edges do not match the configuration");

  ModelParams p;
  p.config = config;
  p.length = length;
  p.variates = variates;
  p.classes = classes;
  p.edges = std::move(edges);

  Rng rng(seed, 0x1417);
  auto fill = [&](std::vector<double>& v, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& w : v) w = rng.uniform(-bound, bound);
  };
  const std::size_t nv = p.symbol_width();
  for (const auto m : config.segments) {
    kernels::Conv1dParams c{Tensor3(config.latent, m, variates), std::vector<double>(config.latent)};
    fill(c.kernels.data, m * variates);
    fill(c.bias, m * variates);
    p.conv.push_back(std::move(c));
  }
  if (config.representation == Representation::RawProjection) {
    for (const auto m : config.segments) {
      kernels::Conv1dParams c{Tensor3(nv, m, variates), std::vector<double>(nv)};
      fill(c.kernels.data, m * variates);
      fill(c.bias, m * variates);
      p.projection.push_back(std::move(c));
    }
  }
  p.head = Matrix(classes, p.feature_dim());
  p.head_bias.assign(classes, 0.0);
  fill(p.head.data, p.feature_dim());
  fill(p.head_bias, p.feature_dim());
  return p;
}

// ---------------------------------------------------------------------------
// Forward

Matrix positional_encoding(std::size_t length, std::size_t variates, double scale) {
  Matrix pe(length, variates);
  for (std::size_t c = 0; c < variates; ++c) {
    const double exponent = static_cast<double>(c - c % 2) / static_cast<double>(variates);
    const double rate = scale / std::pow(10000.0, exponent);
    for (std::size_t t = 0; t < length; ++t) {
      const double angle = static_cast<double>(t) * rate;
      pe(t, c) = c % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

EncodedSample encode(const Matrix& x, const ModelParams& params) {
  if (x.rows != params.length || x.cols != params.variates)
    fail(ErrorKind::ShapeMismatch, "input is " + std::to_string(x.rows) + "x" +
                                       std::to_string(x.cols) + ", model expects " +
                                       std::to_string(params.length) + "x" +
                                       std::to_string(params.variates));
  EncodedSample s;
  s.raw = x;
  s.input = x;
  if (params.config.positional_encoding) {
    const Matrix pe = positional_encoding(x.rows, x.cols, params.config.position_scale);
    for (std::size_t e = 0; e < pe.size(); ++e) s.input.data[e] += pe.data[e];
  }
  s.symbols = symbolic::discretize(x, params.edges);
  return s;
}

namespace {

void activate(const Matrix& pre, Matrix& q, Activation a) {
  q = pre;
  if (a == Activation::Relu)
    for (double& value : q.data) value = value > 0.0 ? value : 0.0;
}

}  // namespace

Matrix latent(const Matrix& x, const ModelParams& params, std::size_t slice) {
  if (slice >= params.conv.size()) fail(ErrorKind::OutOfRange, "segment slice out of range");
  Matrix input = x;
  if (params.config.positional_encoding) {
    const Matrix pe = positional_encoding(x.rows, x.cols, params.config.position_scale);
    if (pe.size() != input.size()) fail(ErrorKind::ShapeMismatch, "latent: input shape");
    for (std::size_t e = 0; e < pe.size(); ++e) input.data[e] += pe.data[e];
  }
  Matrix q;
  activate(kernels::conv1d_forward(input, params.conv[slice]), q, params.config.activation);
  return q;
}

Matrix cross_representation(const Matrix& z, const Matrix& q) {
  if (z.rows != q.rows)
    fail(ErrorKind::ShapeMismatch, "cross_representation: Z has " + std::to_string(z.rows) +
                                       " rows, Q has " + std::to_string(q.rows));
  Matrix p(z.cols, q.cols);
  for (std::size_t k = 0; k < z.rows; ++k) {
    const auto qk = q.row(k);
    for (std::size_t i = 0; i < z.cols; ++i) {
      const double zki = z(k, i);
      if (zki == 0.0) continue;
      auto pi = p.row(i);
      for (std::size_t j = 0; j < q.cols; ++j) pi[j] += zki * qk[j];
    }
  }
  return p;
}

namespace {

// S[t] = (1/m) * sum of Q rows for every segment covering t.
Matrix covering_mean(const Matrix& q, std::size_t segment, std::size_t length) {
  const std::size_t kappa = q.rows;
  Matrix s(length, q.cols);
  const double scale = 1.0 / static_cast<double>(segment);
  for (std::size_t t = 0; t < length; ++t) {
    const std::size_t k0 = t + 1 >= segment ? t + 1 - segment : 0;
    const std::size_t k1 = std::min(t, kappa - 1);
    auto st = s.row(t);
    for (std::size_t k = k0; k <= k1; ++k) {
      const auto qk = q.row(k);
      for (std::size_t j = 0; j < q.cols; ++j) st[j] += qk[j];
    }
    for (double& value : st) value *= scale;
  }
  return s;
}

}  // namespace

Matrix cross_representation(const symbolic::SymbolMatrix& symbols, std::size_t bins,
                            std::size_t segment, const Matrix& q) {
  if (segment == 0 || segment > symbols.length || q.rows != symbols.length - segment + 1)
    fail(ErrorKind::ShapeMismatch, "cross_representation: Q rows do not match L - m + 1");
  const Matrix s = covering_mean(q, segment, symbols.length);
  Matrix p(bins * symbols.variates, q.cols);
  for (std::size_t t = 0; t < symbols.length; ++t) {
    const auto st = s.row(t);
    for (std::size_t c = 0; c < symbols.variates; ++c) {
      const std::size_t sym = symbols(t, c);
      if (sym < 1 || sym > bins) fail(ErrorKind::OutOfRange, "symbol outside [1, n]");
      auto pi = p.row(c * bins + sym - 1);
      for (std::size_t j = 0; j < q.cols; ++j) pi[j] += st[j];
    }
  }
  return p;
}

namespace {

void pool_slice(SliceTrace& s, const TimeSliverConfig& config) {
  switch (config.pooling) {
    case Pooling::Avg:
      s.pooled = kernels::avgpool2d(s.p, config.pool_window);
      break;
    case Pooling::Max: {
      auto r = kernels::maxpool2d(s.p, config.pool_window);
      s.pooled = std::move(r.output);
      s.argmax = std::move(r.argmax);
      break;
    }
    case Pooling::None:
      s.pooled = s.p;
      break;
  }
}

Matrix unpool(const Matrix& grad_pooled, const SliceTrace& s, const TimeSliverConfig& config) {
  switch (config.pooling) {
    case Pooling::Avg:
      return kernels::avgpool2d_backward(grad_pooled, s.p.rows, s.p.cols, config.pool_window);
    case Pooling::Max:
      return kernels::maxpool2d_backward(grad_pooled, s.argmax, s.p.rows, s.p.cols);
    case Pooling::None:
      break;
  }
  return grad_pooled;
}

}  // namespace

ForwardTrace forward(const EncodedSample& sample, const ModelParams& params, bool keep_z) {
  const auto& config = params.config;
  ForwardTrace trace;
  trace.slices.resize(config.segments.size());
  trace.features.reserve(params.feature_dim());
  for (std::size_t l = 0; l < config.segments.size(); ++l) {
    SliceTrace& s = trace.slices[l];
    s.segment = config.segments[l];
    s.pre = kernels::conv1d_forward(sample.input, params.conv[l]);
    activate(s.pre, s.q, config.activation);
    if (config.representation == Representation::Symbolic) {
      s.p = cross_representation(sample.symbols, config.bins, s.segment, s.q);
      if (keep_z) s.z = symbolic::compose_symbols(sample.symbols, config.bins, s.segment).values;
    } else {
      s.z = kernels::conv1d_forward(sample.raw, params.projection[l]);
      s.p = cross_representation(s.z, s.q);
    }
    pool_slice(s, config);
    trace.features.insert(trace.features.end(), s.pooled.data.begin(), s.pooled.data.end());
  }
  trace.logits = kernels::dense_forward(trace.features, params.head, params.head_bias);
  trace.predicted = argmax(trace.logits);
  return trace;
}

ForwardTrace forward(const Matrix& x, const ModelParams& params, bool keep_z) {
  return forward(encode(x, params), params, keep_z);
}

std::vector<double> head_logits(std::span<const Matrix> p_slices, const ModelParams& params) {
  if (p_slices.size() != params.config.segments.size())
    fail(ErrorKind::ShapeMismatch, "head_logits: one P slice per segment size is required");
  std::vector<double> features;
  for (const auto& p : p_slices) {
    if (p.rows != params.symbol_width() || p.cols != params.config.latent)
      fail(ErrorKind::ShapeMismatch, "head_logits: P slice has the wrong shape");
    SliceTrace s;
    s.p = p;
    pool_slice(s, params.config);
    features.insert(features.end(), s.pooled.data.begin(), s.pooled.data.end());
  }
  return kernels::dense_forward(features, params.head, params.head_bias);
}

std::vector<Matrix> logit_gradient_p(const ModelParams& params, const ForwardTrace& trace,
                                     std::size_t target) {
  if (target >= params.classes) fail(ErrorKind::OutOfRange, "target class out of range");
  const std::size_t per_slice = params.slice_features();
  const auto w = params.head.row(target);
  std::vector<Matrix> grads;
  for (std::size_t l = 0; l < trace.slices.size(); ++l) {
    const SliceTrace& s = trace.slices[l];
    Matrix g_pooled(s.pooled.rows, s.pooled.cols);
    std::copy_n(w.begin() + static_cast<std::ptrdiff_t>(l * per_slice), per_slice,
                g_pooled.data.begin());
    grads.push_back(unpool(g_pooled, s, params.config));
  }
  return grads;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

Prediction predict(const Matrix& x, const ModelParams& params) {
  auto trace = forward(x, params, false);
  return {trace.predicted, std::move(trace.logits)};
}

// ---------------------------------------------------------------------------
// Backward

SampleLoss loss_and_gradient(const EncodedSample& sample, std::size_t label,
                             const ModelParams& params, std::span<double> grad, double weight) {
  if (grad.size() != params.parameter_count())
    fail(ErrorKind::ShapeMismatch, "gradient buffer does not match parameter count");
  const auto& config = params.config;
  const ForwardTrace trace = forward(sample, params, false);
  const auto ce = kernels::softmax_cross_entropy(trace.logits, label);
  if (!std::isfinite(ce.loss)) fail(ErrorKind::NumericFailure, "non-finite training loss");

  // Offsets follow flatten() order.
  std::vector<std::size_t> conv_at, proj_at;
  std::size_t at = 0;
  for (const auto& c : params.conv) {
    conv_at.push_back(at);
    at += c.kernels.size() + c.bias.size();
  }
  for (const auto& p : params.projection) {
    proj_at.push_back(at);
    at += p.kernels.size() + p.bias.size();
  }
  const std::size_t head_at = at;

  auto add = [&](std::size_t offset, std::span<const double> values) {
    for (std::size_t e = 0; e < values.size(); ++e) grad[offset + e] += weight * values[e];
  };

  const auto dense = kernels::dense_backward(ce.grad, trace.features, params.head);
  add(head_at, dense.weights.data);
  add(head_at + params.head.size(), dense.bias);

  const std::size_t per_slice = params.slice_features();
  for (std::size_t l = 0; l < trace.slices.size(); ++l) {
    const SliceTrace& s = trace.slices[l];
    Matrix g_pooled(s.pooled.rows, s.pooled.cols);
    std::copy_n(dense.features.begin() + static_cast<std::ptrdiff_t>(l * per_slice), per_slice,
                g_pooled.data.begin());
    const Matrix dp = unpool(g_pooled, s, config);

    Matrix dq(s.q.rows, s.q.cols);
    if (config.representation == Representation::Symbolic) {
      // T[t] = sum over variates of dP at the row selected by the symbol;
      // dQ[k] = (1/m) sum of T over the segment's time points.
      const auto& sym = sample.symbols;
      Matrix t_grad(sym.length, s.q.cols);
      for (std::size_t t = 0; t < sym.length; ++t) {
        auto tt = t_grad.row(t);
        for (std::size_t c = 0; c < sym.variates; ++c) {
          const auto row = dp.row(c * config.bins + sym(t, c) - 1);
          for (std::size_t j = 0; j < tt.size(); ++j) tt[j] += row[j];
        }
      }
      const double scale = 1.0 / static_cast<double>(s.segment);
      for (std::size_t k = 0; k < dq.rows; ++k) {
        auto dk = dq.row(k);
        for (std::size_t r = 0; r < s.segment; ++r) {
          const auto tt = t_grad.row(k + r);
          for (std::size_t j = 0; j < dk.size(); ++j) dk[j] += tt[j];
        }
        for (double& value : dk) value *= scale;
      }
    } else {
      Matrix dz(s.z.rows, s.z.cols);
      for (std::size_t k = 0; k < s.z.rows; ++k) {
        const auto zk = s.z.row(k);
        const auto qk = s.q.row(k);
        auto dqk = dq.row(k);
        auto dzk = dz.row(k);
        for (std::size_t i = 0; i < s.z.cols; ++i) {
          const auto dpi = dp.row(i);
          double acc = 0.0;
          for (std::size_t j = 0; j < dpi.size(); ++j) {
            dqk[j] += zk[i] * dpi[j];
            acc += qk[j] * dpi[j];
          }
          dzk[i] = acc;
        }
      }
      const auto pg = kernels::conv1d_backward(dz, sample.raw, params.projection[l], false);
      add(proj_at[l], pg.kernels.data);
      add(proj_at[l] + pg.kernels.size(), pg.bias);
    }

    if (config.activation == Activation::Relu)
      for (std::size_t e = 0; e < dq.size(); ++e)
        if (!(s.pre.data[e] > 0.0)) dq.data[e] = 0.0;
    const auto cg = kernels::conv1d_backward(dq, sample.input, params.conv[l], false);
    add(conv_at[l], cg.kernels.data);
    add(conv_at[l] + cg.kernels.size(), cg.bias);
  }
  return {ce.loss, trace.predicted};
}

// ---------------------------------------------------------------------------
// Training

EvalStats evaluate(const ModelParams& params, const datasets::TimeSeriesDataset& data,
                   std::size_t jobs) {
  if (data.length != params.length || data.variates != params.variates)
    fail(ErrorKind::ShapeMismatch, "dataset shape does not match the model");
  EvalStats stats;
  stats.predictions.resize(data.count);
  stats.logits.resize(data.count);
  std::vector<double> losses(data.count, 0.0);
  parallel_for(data.count, jobs, [&](std::size_t i) {
    const auto trace = forward(data.sample(i), params, false);
    stats.predictions[i] = trace.predicted;
    const auto label = static_cast<std::size_t>(data.y[i]);
    if (label < params.classes)
      losses[i] = kernels::softmax_cross_entropy(trace.logits, label).loss;
    stats.logits[i] = trace.logits;
  });
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.count; ++i) {
    correct += stats.predictions[i] == static_cast<std::size_t>(data.y[i]) ? 1 : 0;
    loss += losses[i];
  }
  if (data.count > 0) {
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(data.count);
    stats.loss = loss / static_cast<double>(data.count);
  }
  return stats;
}

TrainResult train(const datasets::TimeSeriesDataset& train_set,
                  const datasets::TimeSeriesDataset& valid_set, const TimeSliverConfig& config,
                  const TrainOptions& options) {
  if (train_set.count == 0 || valid_set.count == 0)
    fail(ErrorKind::InvalidConfig, "training and validation splits must be nonempty");
  if (valid_set.length != train_set.length || valid_set.variates != train_set.variates)
    fail(ErrorKind::ShapeMismatch, "training and validation splits differ in shape");
  config.validate(train_set.length, train_set.variates);
  const std::size_t classes = std::max<std::size_t>(
      2, std::max(train_set.classes, valid_set.classes));

  auto edges = symbolic::fit_bins(std::span<const float>(train_set.x), train_set.variates,
                                  {config.bins, 1, config.bin_strategy});
  ModelParams params =
      init_params(config, train_set.length, train_set.variates, classes, std::move(edges),
                  config.seed);

  const std::size_t jobs = std::max<std::size_t>(1, options.jobs);
  std::vector<EncodedSample> encoded(train_set.count);
  parallel_for(train_set.count, jobs,
               [&](std::size_t i) { encoded[i] = encode(train_set.sample(i), params); });

  std::vector<double> flat = params.flatten();
  kernels::AdamState adam(flat.size(), {config.learning_rate, 0.9, 0.999, 1e-8});
  const std::size_t batch = config.batch_size;
  std::vector<std::vector<double>> sample_grads(batch, std::vector<double>(flat.size()));
  std::vector<SampleLoss> sample_losses(batch);
  std::vector<double> grad(flat.size());
  std::vector<std::size_t> order(train_set.count);

  TrainResult result;
  result.params = params;
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(config.seed, 0x5eed0000ULL + epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle_rng.integer(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t size = std::min(batch, order.size() - start);
      parallel_for(size, jobs, [&](std::size_t b) {
        auto& g = sample_grads[b];
        std::fill(g.begin(), g.end(), 0.0);
        const std::size_t idx = order[start + b];
        sample_losses[b] =
            loss_and_gradient(encoded[idx], static_cast<std::size_t>(train_set.y[idx]), params, g);
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      const double inv = 1.0 / static_cast<double>(size);
      for (std::size_t b = 0; b < size; ++b) {
        for (std::size_t e = 0; e < grad.size(); ++e) grad[e] += sample_grads[b][e];
        loss_sum += sample_losses[b].loss;
        correct += sample_losses[b].predicted == static_cast<std::size_t>(train_set.y[order[start + b]]);
      }
      for (double& g : grad) g *= inv;
      kernels::adam_step(flat, grad, adam);
      for (const double w : flat)
        if (!std::isfinite(w))
          fail(ErrorKind::NumericFailure,
               "parameters diverged in epoch " + std::to_string(epoch));
      params.assign(flat);
    }

    const auto valid = evaluate(params, valid_set, jobs);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.count);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.count);
    rec.valid_loss = valid.loss;
    rec.valid_accuracy = valid.accuracy;
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.valid_loss))
      fail(ErrorKind::NumericFailure, "non-finite loss in epoch " + std::to_string(epoch));

    const bool improved =
        !have_best || valid.accuracy > result.best_valid_accuracy ||
        (valid.accuracy == result.best_valid_accuracy && valid.loss < result.best_valid_loss);
    if (improved) {
      have_best = true;
      rec.checkpoint = true;
      result.params = params;
      result.best_epoch = epoch;
      result.best_valid_accuracy = valid.accuracy;
      result.best_valid_loss = valid.loss;
    }
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (!improved && epoch - result.best_epoch >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace timesliver::model
