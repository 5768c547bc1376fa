#include "timesliver/io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "timesliver/error.hpp"

namespace timesliver::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : doc.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json layout_of(const model::ModelParams& p) {
  json layout = json::array();
  auto entry = [&](const std::string& name, std::vector<std::size_t> shape) {
    layout.push_back({{"name", name}, {"shape", std::move(shape)}});
  };
  for (std::size_t l = 0; l < p.conv.size(); ++l) {
    const auto& c = p.conv[l];
    entry("conv" + std::to_string(l) + ".kernels", {c.kernels.depth, c.kernels.rows, c.kernels.cols});
    entry("conv" + std::to_string(l) + ".bias", {c.bias.size()});
  }
  for (std::size_t l = 0; l < p.projection.size(); ++l) {
    const auto& c = p.projection[l];
    entry("projection" + std::to_string(l) + ".kernels",
          {c.kernels.depth, c.kernels.rows, c.kernels.cols});
    entry("projection" + std::to_string(l) + ".bias", {c.bias.size()});
  }
  entry("head.weights", {p.head.rows, p.head.cols});
  entry("head.bias", {p.head_bias.size()});
  return layout;
}

json hashed_part(const model::ModelParams& params, const json& metadata) {
  return {{"config", params.config.to_json()},
          {"length", params.length},
          {"variates", params.variates},
          {"classes", params.classes},
          {"run", metadata}};
}

}  // namespace

void save_model(const model::ModelParams& params, const fs::path& dir, const json& metadata) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  const std::vector<double> weights = params.flatten();
  json doc = hashed_part(params, metadata);
  doc["version"] = kModelFormatVersion;
  doc["parameter_count"] = weights.size();
  doc["bins"] = params.edges.bins;
  doc["edges"] = params.edges.edges;
  doc["layout"] = layout_of(params);
  doc["config_hash"] = config_hash(hashed_part(params, metadata));

  {
    std::ofstream out(dir / "weights.f64le", std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write weights in " + dir.string());
    out.write(reinterpret_cast<const char*>(weights.data()),
              static_cast<std::streamsize>(weights.size() * sizeof(double)));
    if (!out) fail(ErrorKind::Io, "weight write failed in " + dir.string());
  }
  std::ofstream out(dir / "model.json", std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write model.json in " + dir.string());
  out << doc.dump(1) << '\n';
}

ModelArtifact load_model(const fs::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) fail(ErrorKind::Io, "no model at " + dir.string() + " (missing model.json)");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::CorruptHeader, "model.json is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object() || !doc.contains("version") || !doc["version"].is_number_integer())
    fail(ErrorKind::CorruptHeader, "model.json lacks an integer version");
  if (doc["version"].get<int>() != kModelFormatVersion)
    fail(ErrorKind::UnknownVersion,
         "unsupported model version " + std::to_string(doc["version"].get<int>()));

  ModelArtifact art;
  std::size_t expected = 0;
  try {
    const auto config = model::TimeSliverConfig::from_json(doc.at("config"));
    symbolic::BinEdges edges;
    edges.bins = doc.at("bins").get<std::size_t>();
    edges.edges = doc.at("edges").get<std::vector<std::vector<double>>>();
    art.params = model::init_params(config, doc.at("length").get<std::size_t>(),
                                    doc.at("variates").get<std::size_t>(),
                                    doc.at("classes").get<std::size_t>(), std::move(edges), 0);
    expected = doc.at("parameter_count").get<std::size_t>();
    art.metadata = doc.value("run", json::object());
    art.config_hash = doc.value("config_hash", std::string());
  } catch (const json::exception& e) {
    fail(ErrorKind::CorruptHeader, "model.json: " + std::string(e.what()));
  }
  if (expected != art.params.parameter_count())
    fail(ErrorKind::CorruptHeader, "model.json parameter count disagrees with its config");

  std::ifstream blob(dir / "weights.f64le", std::ios::binary);
  if (!blob) fail(ErrorKind::Io, "missing weights.f64le in " + dir.string());
  blob.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(blob.tellg());
  if (bytes != expected * sizeof(double))
    fail(ErrorKind::LengthMismatch, "weights.f64le: expected " +
                                        std::to_string(expected * sizeof(double)) +
                                        " bytes, found " + std::to_string(bytes));
  blob.seekg(0);
  std::vector<double> weights(expected);
  blob.read(reinterpret_cast<char*>(weights.data()), static_cast<std::streamsize>(bytes));
  art.params.assign(weights);
  return art;
}

void write_history_csv(std::ostream& out, std::span<const model::EpochRecord> history) {
  out << "epoch,train_loss,train_accuracy,valid_loss,valid_accuracy,checkpoint\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.6f,%.10g,%.6f,%d\n", r.epoch, r.train_loss,
                  r.train_accuracy, r.valid_loss, r.valid_accuracy, r.checkpoint ? 1 : 0);
    out << buf;
  }
}

}  // namespace timesliver::io
