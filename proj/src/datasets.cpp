#include "timesliver/datasets.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "timesliver/error.hpp"
#include "timesliver/parallel.hpp"
#include "timesliver/random.hpp"

namespace timesliver::datasets {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

Matrix TimeSeriesDataset::sample(std::size_t i) const {
  Matrix m(length, variates);
  const auto s = series(i);
  for (std::size_t e = 0; e < s.size(); ++e) m.data[e] = static_cast<double>(s[e]);
  return m;
}

TimeSeriesDataset TimeSeriesDataset::select(std::span<const std::size_t> indices) const {
  TimeSeriesDataset out;
  out.count = indices.size();
  out.length = length;
  out.variates = variates;
  out.classes = classes;
  out.split = split;
  out.provenance = provenance;
  out.x.reserve(indices.size() * length * variates);
  out.y.reserve(indices.size());
  if (mask) out.mask.emplace().reserve(indices.size() * length);
  for (const std::size_t i : indices) {
    if (i >= count) fail(ErrorKind::OutOfRange, "dataset index out of range");
    const auto s = series(i);
    out.x.insert(out.x.end(), s.begin(), s.end());
    out.y.push_back(y[i]);
    if (mask) {
      const auto g = mask_of(i);
      out.mask->insert(out.mask->end(), g.begin(), g.end());
    }
  }
  return out;
}

TimeSeriesDataset TimeSeriesDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > count) fail(ErrorKind::OutOfRange, "dataset slice out of range");
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return select(idx);
}

void TimeSeriesDataset::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::Validation, what); };
  if (length == 0 || variates == 0) bad("length and variates must be positive");
  if (x.size() != count * length * variates) bad("X size does not match N*L*v");
  if (y.size() != count) bad("label count does not match N");
  if (classes == 0) bad("class count must be positive");
  for (const auto label : y)
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      bad("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
  for (const float value : x)
    if (!std::isfinite(value)) bad("non-finite value in X");
  if (mask) {
    if (mask->size() != count * length) bad("mask size does not match N*L");
    for (const auto g : *mask)
      if (g > 1) bad("mask entries must be 0 or 1");
  }
}

// ---------------------------------------------------------------------------
// Generators

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

TimeSeriesDataset blank(std::size_t count, std::size_t length, std::size_t variates,
                        std::size_t classes, bool with_mask) {
  TimeSeriesDataset d;
  d.count = count;
  d.length = length;
  d.variates = variates;
  d.classes = classes;
  d.x.assign(count * length * variates, 0.0F);
  d.y.assign(count, 0);
  if (with_mask) d.mask.emplace(count * length, 0);
  return d;
}

template <typename T>
void read_param(const json& doc, const char* key, T& target) {
  if (!doc.contains(key)) return;
  try {
    target = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("generator parameter '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& doc, const std::set<std::string>& known,
                    const std::string& generator) {
  if (!doc.is_object()) fail(ErrorKind::InvalidConfig, "generator parameters must be an object");
  for (const auto& [key, _] : doc.items())
    if (!known.contains(key))
      fail(ErrorKind::InvalidConfig, "unknown parameter '" + key + "' for " + generator);
}

json to_json(const FreqSumParams& p) {
  return {{"length", p.length},
          {"variates", p.variates},
          {"window", p.window},
          {"base_min_frequency", p.base_min_frequency},
          {"base_max_frequency", p.base_max_frequency},
          {"base_amplitude", p.base_amplitude},
          {"min_frequency", p.min_frequency},
          {"max_frequency", p.max_frequency},
          {"signal_amplitude", p.signal_amplitude},
          {"square_probability", p.square_probability},
          {"square_amplitude", p.square_amplitude},
          {"noise", p.noise},
          {"threshold", p.threshold}};
}

json to_json(const SeqCombParams& p) {
  return {{"length", p.length}, {"variates", p.variates}, {"window", p.window},
          {"slope", p.slope}, {"noise", p.noise}};
}

json to_json(const LowVarParams& p) {
  return {{"length", p.length}, {"window", p.window},
          {"variance_ratio", p.variance_ratio}, {"shift", p.shift}};
}

json to_json(const FarFieldParams& p) {
  return {{"length", p.length}, {"min_frequency", p.min_frequency},
          {"max_frequency", p.max_frequency}, {"eta", p.eta}};
}

FreqSumParams freqsum_from(const json& doc) {
  FreqSumParams p;
  reject_unknown(doc, {"length", "variates", "window", "base_min_frequency",
                       "base_max_frequency", "base_amplitude", "min_frequency",
                       "max_frequency", "signal_amplitude", "square_probability",
                       "square_amplitude", "noise", "threshold"},
                 "freqsum");
  read_param(doc, "length", p.length);
  read_param(doc, "variates", p.variates);
  read_param(doc, "window", p.window);
  read_param(doc, "base_min_frequency", p.base_min_frequency);
  read_param(doc, "base_max_frequency", p.base_max_frequency);
  read_param(doc, "base_amplitude", p.base_amplitude);
  read_param(doc, "min_frequency", p.min_frequency);
  read_param(doc, "max_frequency", p.max_frequency);
  read_param(doc, "signal_amplitude", p.signal_amplitude);
  read_param(doc, "square_probability", p.square_probability);
  read_param(doc, "square_amplitude", p.square_amplitude);
  read_param(doc, "noise", p.noise);
  read_param(doc, "threshold", p.threshold);
  return p;
}

SeqCombParams seqcomb_from(const json& doc, std::size_t default_variates,
                           const std::string& name) {
  SeqCombParams p;
  p.variates = default_variates;
  reject_unknown(doc, {"length", "variates", "window", "slope", "noise"}, name);
  read_param(doc, "length", p.length);
  read_param(doc, "variates", p.variates);
  read_param(doc, "window", p.window);
  read_param(doc, "slope", p.slope);
  read_param(doc, "noise", p.noise);
  return p;
}

LowVarParams lowvar_from(const json& doc) {
  LowVarParams p;
  reject_unknown(doc, {"length", "window", "variance_ratio", "shift"}, "lowvar");
  read_param(doc, "length", p.length);
  read_param(doc, "window", p.window);
  read_param(doc, "variance_ratio", p.variance_ratio);
  read_param(doc, "shift", p.shift);
  return p;
}

FarFieldParams farfield_from(const json& doc) {
  FarFieldParams p;
  reject_unknown(doc, {"length", "min_frequency", "max_frequency", "eta"}, "farfield");
  read_param(doc, "length", p.length);
  read_param(doc, "min_frequency", p.min_frequency);
  read_param(doc, "max_frequency", p.max_frequency);
  read_param(doc, "eta", p.eta);
  return p;
}

json base_provenance(const std::string& name, std::uint64_t seed, json params) {
  return {{"generator", name}, {"seed", seed}, {"parameters", std::move(params)}};
}

}  // namespace

std::int32_t freqsum_label(int f1, int f2, int threshold) {
  return f1 + f2 > threshold ? 1 : 0;
}

TimeSeriesDataset gen_freqsum(std::size_t count, std::uint64_t seed,
                              const FreqSumParams& p, std::size_t jobs) {
  if (p.variates < 2) fail(ErrorKind::InvalidConfig, "freqsum needs at least 2 variates");
  if (p.window == 0 || p.window > p.length)
    fail(ErrorKind::InvalidConfig, "freqsum window must be in [1, length]");
  if (p.min_frequency > p.max_frequency)
    fail(ErrorKind::InvalidConfig, "freqsum frequency range is empty");

  const std::size_t L = p.length;
  const std::size_t v = p.variates;
  auto d = blank(count, L, v, 2, true);
  std::vector<std::array<int, 2>> frequencies(count);

  parallel_for(count, jobs, [&](std::size_t i) {
    Rng rng(seed, i);
    std::vector<double> series(L * v, 0.0);
    auto at = [&](std::size_t t, std::size_t c) -> double& { return series[t * v + c]; };
    const double dt = 1.0 / static_cast<double>(L);

    for (std::size_t c = 0; c < v; ++c) {
      const double f = rng.uniform(p.base_min_frequency, p.base_max_frequency);
      const double phase = rng.uniform(0.0, kTwoPi);
      for (std::size_t t = 0; t < L; ++t)
        at(t, c) = p.base_amplitude * std::sin(kTwoPi * f * static_cast<double>(t) * dt + phase);
    }

    // Two distinct discriminative features.
    const auto first = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(v) - 1));
    auto second = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(v) - 2));
    if (second >= first) ++second;
    const std::array<std::size_t, 2> chosen{first, second};

    auto add_window = [&](std::size_t c, bool square, double amplitude, std::uint8_t* mask) {
      const int f = static_cast<int>(rng.integer(p.min_frequency, p.max_frequency));
      const auto start = static_cast<std::size_t>(
          rng.integer(0, static_cast<std::int64_t>(L - p.window)));
      for (std::size_t t = start; t < start + p.window; ++t) {
        double s = std::sin(kTwoPi * f * static_cast<double>(t) * dt);
        if (square) s = static_cast<double>((s > 0.0) - (s < 0.0));
        at(t, c) += amplitude * s;
        if (mask) mask[t] = 1;
      }
      return f;
    };

    std::uint8_t* mask = d.mask->data() + i * L;
    frequencies[i][0] = add_window(chosen[0], false, p.signal_amplitude, mask);
    frequencies[i][1] = add_window(chosen[1], false, p.signal_amplitude, mask);
    for (std::size_t c = 0; c < v; ++c) {
      if (c == chosen[0] || c == chosen[1]) continue;
      if (rng.bernoulli(p.square_probability)) add_window(c, true, p.square_amplitude, nullptr);
    }
    if (p.noise > 0.0)
      for (auto& value : series) value += rng.normal(0.0, p.noise);

    auto out = d.series(i);
    for (std::size_t e = 0; e < series.size(); ++e) out[e] = static_cast<float>(series[e]);
    d.y[i] = freqsum_label(frequencies[i][0], frequencies[i][1], p.threshold);
  });

  json freqs = json::array();
  for (const auto& f : frequencies) freqs.push_back({f[0], f[1]});
  d.provenance = base_provenance("freqsum", seed, to_json(p));
  d.provenance["frequencies"] = std::move(freqs);
  return d;
}

TimeSeriesDataset gen_seqcomb(std::size_t count, std::uint64_t seed,
                              const SeqCombParams& p, std::size_t jobs) {
  const std::size_t L = p.length;
  const std::size_t v = p.variates;
  if (v == 0) fail(ErrorKind::InvalidConfig, "seqcomb needs at least one variate");
  if (p.window == 0 || 2 * p.window > L)
    fail(ErrorKind::InvalidConfig, "seqcomb window must fit in each half of the series");
  auto d = blank(count, L, v, 4, true);
  const std::size_t half = L / 2;

  parallel_for(count, jobs, [&](std::size_t i) {
    Rng rng(seed, i);
    // Classes cycle up-up, up-down, down-up, down-down.
    const int label = static_cast<int>(i % 4);
    const double dir1 = label < 2 ? 1.0 : -1.0;
    const double dir2 = label % 2 == 0 ? 1.0 : -1.0;

    auto out = d.series(i);
    std::vector<double> series(L * v);
    for (auto& value : series) value = rng.normal(0.0, p.noise);

    // First window in the first half, second in the second half: never overlap.
    const auto s1 = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(half - p.window)));
    const auto s2 = static_cast<std::size_t>(
        rng.integer(static_cast<std::int64_t>(half), static_cast<std::int64_t>(L - p.window)));
    const auto c1 = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(v) - 1));
    const auto c2 = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(v) - 1));
    std::uint8_t* mask = d.mask->data() + i * L;
    for (std::size_t r = 0; r < p.window; ++r) {
      series[(s1 + r) * v + c1] += dir1 * p.slope * static_cast<double>(r);
      series[(s2 + r) * v + c2] += dir2 * p.slope * static_cast<double>(r);
      mask[s1 + r] = 1;
      mask[s2 + r] = 1;
    }
    for (std::size_t e = 0; e < series.size(); ++e) out[e] = static_cast<float>(series[e]);
    d.y[i] = label;
  });

  d.provenance = base_provenance(v == 1 ? "seqcomb_uv" : "seqcomb_mv", seed, to_json(p));
  return d;
}

TimeSeriesDataset gen_lowvar(std::size_t count, std::uint64_t seed, const LowVarParams& p,
                             std::size_t jobs) {
  const std::size_t L = p.length;
  if (p.window == 0 || p.window > L)
    fail(ErrorKind::InvalidConfig, "lowvar window must be in [1, length]");
  if (!(p.variance_ratio > 0.0)) fail(ErrorKind::InvalidConfig, "variance ratio must be > 0");
  constexpr std::size_t v = 2;
  auto d = blank(count, L, v, 4, true);
  const double window_std = std::sqrt(p.variance_ratio);

  parallel_for(count, jobs, [&](std::size_t i) {
    Rng rng(seed, i);
    // Class = channel (label % 2) x mean shift (negative below 2, positive from 2).
    const int label = static_cast<int>(i % 4);
    const std::size_t channel = static_cast<std::size_t>(label % 2);
    const double mean = label >= 2 ? p.shift : -p.shift;

    std::vector<double> series(L * v);
    for (auto& value : series) value = rng.normal();
    const auto start = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(L - p.window)));
    std::uint8_t* mask = d.mask->data() + i * L;
    for (std::size_t t = start; t < start + p.window; ++t) {
      series[t * v + channel] = rng.normal(mean, window_std);
      mask[t] = 1;
    }
    auto out = d.series(i);
    for (std::size_t e = 0; e < series.size(); ++e) out[e] = static_cast<float>(series[e]);
    d.y[i] = label;
  });

  d.provenance = base_provenance("lowvar", seed, to_json(p));
  return d;
}

double farfield_product(std::span<const float> series) {
  const std::size_t L = series.size();
  double p = 0.0;
  for (std::size_t j = 0; j < L / 2; ++j)
    p += static_cast<double>(series[j]) * static_cast<double>(series[L - 1 - j]);
  return p;
}

TimeSeriesDataset gen_farfield(std::size_t count, std::uint64_t seed, const FarFieldParams& p,
                               std::size_t jobs) {
  const std::size_t L = p.length;
  if (L < 2 || L % 2 != 0) fail(ErrorKind::InvalidConfig, "farfield length must be even and >= 2");
  auto d = blank(count, L, 1, 2, false);
  const double centre = static_cast<double>(L) / 2.0;

  parallel_for(count, jobs, [&](std::size_t i) {
    Rng rng(seed, i);
    const double f = rng.uniform(p.min_frequency, p.max_frequency);
    const double phase = rng.uniform(0.0, kTwoPi);
    auto out = d.series(i);
    for (std::size_t k = 0; k < L; ++k) {
      const double t = static_cast<double>(k + 1);
      const double eta = rng.normal(0.0, p.eta);
      out[k] = static_cast<float>(std::sin(f * t + phase) + eta * (t - centre));
    }
    // Label from the stored float32 values so it can be recomputed exactly.
    d.y[i] = farfield_product(out) > 0.0 ? 1 : 0;
  });

  d.provenance = base_provenance("farfield", seed, to_json(p));
  return d;
}

std::vector<std::string> generator_names() {
  return {"freqsum", "seqcomb_uv", "seqcomb_mv", "lowvar", "farfield"};
}

TimeSeriesDataset generate(const GeneratorSpec& spec) {
  if (spec.count == 0) fail(ErrorKind::InvalidConfig, "sample count must be >= 1");
  const auto& params = spec.parameters.is_null() ? json::object() : spec.parameters;
  if (spec.name == "freqsum")
    return gen_freqsum(spec.count, spec.seed, freqsum_from(params), spec.jobs);
  if (spec.name == "seqcomb_uv")
    return gen_seqcomb(spec.count, spec.seed, seqcomb_from(params, 1, spec.name), spec.jobs);
  if (spec.name == "seqcomb_mv")
    return gen_seqcomb(spec.count, spec.seed, seqcomb_from(params, 4, spec.name), spec.jobs);
  if (spec.name == "lowvar")
    return gen_lowvar(spec.count, spec.seed, lowvar_from(params), spec.jobs);
  if (spec.name == "farfield")
    return gen_farfield(spec.count, spec.seed, farfield_from(params), spec.jobs);
  fail(ErrorKind::InvalidConfig, "unknown generator '" + spec.name + "'");
}

// ---------------------------------------------------------------------------
// Directory format

namespace {

template <typename T>
void write_blob(const fs::path& path, const std::vector<T>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

template <typename T>
std::vector<T> read_blob(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(T))
    fail(ErrorKind::LengthMismatch, path.filename().string() + ": expected " +
                                        std::to_string(expected * sizeof(T)) + " bytes, found " +
                                        std::to_string(bytes));
  in.seekg(0);
  std::vector<T> values(expected);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) fail(ErrorKind::Io, "read failed for " + path.string());
  return values;
}

}  // namespace

void save(const TimeSeriesDataset& dataset, const fs::path& dir) {
  dataset.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  json meta = {{"version", kFormatVersion},
               {"N", dataset.count},
               {"L", dataset.length},
               {"v", dataset.variates},
               {"C", dataset.classes},
               {"has_mask", dataset.has_mask()},
               {"split", dataset.split},
               {"provenance", dataset.provenance}};
  write_blob(dir / "x.f32le", dataset.x);
  write_blob(dir / "y.i32le", dataset.y);
  if (dataset.mask) {
    write_blob(dir / "g.u8", *dataset.mask);
  } else {
    fs::remove(dir / "g.u8", ec);
  }
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write meta.json in " + dir.string());
  out << meta.dump(1) << '\n';
}

TimeSeriesDataset load(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  std::ifstream in(meta_path);
  if (!in) fail(ErrorKind::Io, "no dataset at " + dir.string() + " (missing meta.json)");
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::CorruptHeader, "meta.json is not valid JSON: " + std::string(e.what()));
  }
  if (!meta.is_object() || !meta.contains("version"))
    fail(ErrorKind::CorruptHeader, "meta.json lacks a version field");
  if (!meta["version"].is_number_integer())
    fail(ErrorKind::CorruptHeader, "meta.json version is not an integer");
  if (meta["version"].get<int>() != kFormatVersion)
    fail(ErrorKind::UnknownVersion,
         "unsupported dataset version " + std::to_string(meta["version"].get<int>()));

  TimeSeriesDataset d;
  bool has_mask = false;
  try {
    d.count = meta.at("N").get<std::size_t>();
    d.length = meta.at("L").get<std::size_t>();
    d.variates = meta.at("v").get<std::size_t>();
    d.classes = meta.at("C").get<std::size_t>();
    has_mask = meta.at("has_mask").get<bool>();
    d.split = meta.value("split", std::string("all"));
    d.provenance = meta.value("provenance", json::object());
  } catch (const json::exception& e) {
    fail(ErrorKind::CorruptHeader, "meta.json: " + std::string(e.what()));
  }
  d.x = read_blob<float>(dir / "x.f32le", d.count * d.length * d.variates);
  d.y = read_blob<std::int32_t>(dir / "y.i32le", d.count);
  if (has_mask) d.mask = read_blob<std::uint8_t>(dir / "g.u8", d.count * d.length);
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// CSV import

CsvLayout CsvLayout::from_json(const json& doc) {
  CsvLayout layout;
  try {
    const std::string shape = doc.value("shape", std::string("wide"));
    if (shape == "wide") {
      layout.shape = Shape::Wide;
    } else if (shape == "long") {
      layout.shape = Shape::Long;
    } else {
      fail(ErrorKind::InvalidConfig, "csv layout shape must be 'wide' or 'long'");
    }
    layout.length = doc.at("length").get<std::size_t>();
    layout.variates = doc.value("variates", std::size_t{1});
    layout.label_column = doc.value("label_column", layout.label_column);
    layout.sample_column = doc.value("sample_column", layout.sample_column);
    layout.value_columns = doc.value("value_columns", std::vector<std::string>{});
    if (doc.contains("classes")) layout.classes = doc.at("classes").get<std::size_t>();
    layout.header = doc.value("header", true);
    const std::string delim = doc.value("delimiter", std::string(","));
    if (delim.size() != 1) fail(ErrorKind::InvalidConfig, "csv delimiter must be one character");
    layout.delimiter = delim[0];
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, "csv layout: " + std::string(e.what()));
  }
  return layout;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, delimiter)) {
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? std::string() : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == delimiter) fields.emplace_back();
  return fields;
}

std::string where(std::size_t row, std::size_t col) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col + 1);
}

double parse_double(const std::string& text, std::size_t row, std::size_t col) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    fail(ErrorKind::Parse, "cannot parse '" + text + "' as a number at " + where(row, col));
  }
}

std::int64_t parse_label(const std::string& text, std::size_t row, std::size_t col) {
  const double value = parse_double(text, row, col);
  if (value != std::floor(value))
    fail(ErrorKind::Parse, "label '" + text + "' is not an integer at " + where(row, col));
  return static_cast<std::int64_t>(value);
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) fail(ErrorKind::Parse, "csv header has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

TimeSeriesDataset import_csv(const fs::path& path, const CsvLayout& layout) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  if (layout.length == 0) fail(ErrorKind::InvalidConfig, "csv layout must declare length > 0");

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::vector<std::string> header;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_line(line, layout.delimiter);
    if (layout.header && header.empty()) {
      header = std::move(fields);
      continue;
    }
    rows.push_back(std::move(fields));
    line_numbers.push_back(line_no);
  }

  TimeSeriesDataset d;
  d.length = layout.length;
  d.variates = layout.variates;
  std::vector<std::int64_t> labels;

  if (layout.shape == CsvLayout::Shape::Wide) {
    if (layout.variates != 1)
      fail(ErrorKind::InvalidConfig, "wide csv layout is univariate; use the long layout");
    const std::size_t label_col = layout.header ? column_index(header, layout.label_column) : 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& fields = rows[r];
      if (fields.size() != layout.length + 1)
        fail(ErrorKind::Validation, "ragged sample at row " + std::to_string(line_numbers[r]) +
                                        ": expected " + std::to_string(layout.length) +
                                        " values, found " + std::to_string(fields.size() - 1));
      for (std::size_t c = 0; c < fields.size(); ++c) {
        if (c == label_col) {
          labels.push_back(parse_label(fields[c], line_numbers[r], c));
        } else {
          d.x.push_back(static_cast<float>(parse_double(fields[c], line_numbers[r], c)));
        }
      }
    }
  } else {
    if (!layout.header) fail(ErrorKind::InvalidConfig, "long csv layout requires a header row");
    const std::size_t sample_col = column_index(header, layout.sample_column);
    const std::size_t label_col = column_index(header, layout.label_column);
    if (layout.value_columns.size() != layout.variates)
      fail(ErrorKind::InvalidConfig, "long csv layout needs one value column per variate");
    std::vector<std::size_t> value_cols;
    for (const auto& name : layout.value_columns) value_cols.push_back(column_index(header, name));

    std::size_t r = 0;
    while (r < rows.size()) {
      const std::string id = rows[r].at(sample_col);
      std::size_t steps = 0;
      std::int64_t label = 0;
      for (; r < rows.size() && rows[r].size() > sample_col && rows[r][sample_col] == id; ++r) {
        const auto& fields = rows[r];
        if (fields.size() != header.size())
          fail(ErrorKind::Parse, "row " + std::to_string(line_numbers[r]) + " has " +
                                     std::to_string(fields.size()) + " fields, header has " +
                                     std::to_string(header.size()));
        const std::int64_t row_label = parse_label(fields[label_col], line_numbers[r], label_col);
        if (steps == 0) {
          label = row_label;
        } else if (row_label != label) {
          fail(ErrorKind::Validation, "label changes within sample '" + id + "' at row " +
                                          std::to_string(line_numbers[r]));
        }
        for (const auto c : value_cols)
          d.x.push_back(static_cast<float>(parse_double(fields[c], line_numbers[r], c)));
        ++steps;
      }
      if (steps != layout.length)
        fail(ErrorKind::Validation, "ragged sample '" + id + "': " + std::to_string(steps) +
                                        " rows, expected " + std::to_string(layout.length));
      labels.push_back(label);
    }
  }

  if (labels.empty()) fail(ErrorKind::Validation, "csv file contains no samples");
  std::int64_t max_label = 0;
  for (const auto label : labels) {
    if (label < 0) fail(ErrorKind::Validation, "negative label " + std::to_string(label));
    max_label = std::max(max_label, label);
  }
  d.classes = layout.classes.value_or(static_cast<std::size_t>(std::max<std::int64_t>(max_label + 1, 2)));
  for (const auto label : labels) {
    if (static_cast<std::size_t>(label) >= d.classes)
      fail(ErrorKind::Validation, "label " + std::to_string(label) + " outside [0, " +
                                      std::to_string(d.classes) + ")");
    d.y.push_back(static_cast<std::int32_t>(label));
  }
  d.count = labels.size();
  d.provenance = {{"generator", "csv"}, {"source", path.filename().string()}};
  d.validate();
  return d;
}

}  // namespace timesliver::datasets
