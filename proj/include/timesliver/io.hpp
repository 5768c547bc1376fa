#pragma once

// Model artifacts and run fingerprints.
//
// A model directory holds model.json (format version, config, shapes,
// parameter count, bin edges, tensor layout, config hash and free-form run
// metadata) and weights.f64le (little-endian float64 in flatten() order).

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include <json.hpp>

#include "timesliver/model.hpp"

namespace timesliver::io {

inline constexpr int kModelFormatVersion = 1;

/// 64-bit FNV-1a over the compact dump of `doc` (object keys sorted), as 16
/// lowercase hex digits.
std::string config_hash(const nlohmann::json& doc);

struct ModelArtifact {
  model::ModelParams params;
  nlohmann::json metadata = nlohmann::json::object();
  std::string config_hash;
};

/// `metadata` is stored verbatim under "run". The config hash covers the
/// model config together with `metadata`.
void save_model(const model::ModelParams& params, const std::filesystem::path& dir,
                const nlohmann::json& metadata = nlohmann::json::object());

ModelArtifact load_model(const std::filesystem::path& dir);

void write_history_csv(std::ostream& out, std::span<const model::EpochRecord> history);

}  // namespace timesliver::io
