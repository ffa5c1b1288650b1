#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "kiln/model.hpp"
#include "kiln/rs/pipeline.hpp"

namespace kilnkit {

inline constexpr const char *kVersion = "0.1.0";

struct DetectSection {
  kiln::rs::DetectConfig pipeline;
  /// PNG tiles must be this many pixels square; 0 accepts any size.
  std::size_t png_tile_size = 256;
};

struct GraphSection {
  std::size_t k = 8;
  std::size_t buffer_px = 3;
  std::string label_column = "label";
  /// Empty: every column besides id/lon/lat/label.
  std::vector<std::string> feature_columns;
};

struct EvalSection {
  double iou_threshold = 0.3;
  int num_classes = 2;
};

struct RunConfig {
  DetectSection detect;
  GraphSection graph;
  kiln::model::TrainConfig train;
  EvalSection eval;
};

/// Parses `{detect, graph, train, eval}`; every section and key is optional,
/// unknown ones are rejected. An empty path yields the defaults.
RunConfig load_run_config(const std::filesystem::path &path);
RunConfig parse_run_config(const nlohmann::json &j);

nlohmann::ordered_json to_json(const DetectSection &s);
nlohmann::ordered_json to_json(const GraphSection &s);
nlohmann::ordered_json to_json(const EvalSection &s);

/// 64-bit FNV-1a of the compact dump, as 16 hex digits.
std::string config_hash(const nlohmann::ordered_json &j);

} // namespace kilnkit
