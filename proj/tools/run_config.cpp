#include "run_config.hpp"

#include <cstdio>
#include <fstream>

#include "kiln/checkpoint.hpp"
#include "kiln/error.hpp"

namespace kilnkit {

using kiln::Error;
using kiln::ErrorCode;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void unknown(const std::string &section, const std::string &key) {
  throw Error(ErrorCode::InvalidArgument, "unknown config key '" + section + "." + key + "'");
}

void parse_detect(const json &j, DetectSection &s) {
  auto &p = s.pipeline;
  for (const auto &[key, v] : j.items()) {
    if (key == "percentile") p.percentile = v.get<double>();
    else if (key == "window") p.window = v.get<std::size_t>();
    else if (key == "se_radius") p.se_radius = v.get<std::size_t>();
    else if (key == "bins") p.bins = v.get<std::size_t>();
    else if (key == "threshold_scope") {
      const auto scope = v.get<std::string>();
      if (scope == "scene") p.threshold_scope = kiln::rs::ThresholdScope::Scene;
      else if (scope == "tile") p.threshold_scope = kiln::rs::ThresholdScope::Tile;
      else throw Error(ErrorCode::InvalidArgument, "threshold_scope must be 'scene' or 'tile'");
    } else if (key == "min_threshold") p.min_threshold = v.get<double>();
    else if (key == "building_height_m") p.height.building_height_m = v.get<double>();
    else if (key == "tall_height_m") p.height.tall_height_m = v.get<double>();
    else if (key == "max_tall_fraction") p.height.max_tall_fraction = v.get<double>();
    else if (key == "png_tile_size") s.png_tile_size = v.get<std::size_t>();
    else unknown("detect", key);
  }
}

void parse_graph(const json &j, GraphSection &s) {
  for (const auto &[key, v] : j.items()) {
    if (key == "k") s.k = v.get<std::size_t>();
    else if (key == "buffer_px") s.buffer_px = v.get<std::size_t>();
    else if (key == "label_column") s.label_column = v.get<std::string>();
    else if (key == "feature_columns") s.feature_columns = v.get<std::vector<std::string>>();
    else unknown("graph", key);
  }
}

void parse_eval(const json &j, EvalSection &s) {
  for (const auto &[key, v] : j.items()) {
    if (key == "iou_threshold") s.iou_threshold = v.get<double>();
    else if (key == "num_classes") s.num_classes = v.get<int>();
    else unknown("eval", key);
  }
}

} // namespace

RunConfig parse_run_config(const json &j) {
  RunConfig cfg;
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  try {
    for (const auto &[key, v] : j.items()) {
      if (!v.is_object()) throw Error(ErrorCode::InvalidArgument, "config section '" + key + "' must be an object");
      if (key == "detect") parse_detect(v, cfg.detect);
      else if (key == "graph") parse_graph(v, cfg.graph);
      else if (key == "train") cfg.train = kiln::model::train_config_from_json(v, cfg.train);
      else if (key == "eval") parse_eval(v, cfg.eval);
      else throw Error(ErrorCode::InvalidArgument, "unknown config section '" + key + "'");
    }
  } catch (const json::exception &e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

ordered_json to_json(const DetectSection &s) {
  const auto &p = s.pipeline;
  ordered_json j;
  j["percentile"] = p.percentile;
  j["window"] = p.window;
  j["se_radius"] = p.se_radius;
  j["bins"] = p.bins;
  j["threshold_scope"] = p.threshold_scope == kiln::rs::ThresholdScope::Scene ? "scene" : "tile";
  j["min_threshold"] = p.min_threshold;
  j["building_height_m"] = p.height.building_height_m;
  j["tall_height_m"] = p.height.tall_height_m;
  j["max_tall_fraction"] = p.height.max_tall_fraction;
  j["png_tile_size"] = s.png_tile_size;
  return j;
}

ordered_json to_json(const GraphSection &s) {
  return {{"k", s.k},
          {"buffer_px", s.buffer_px},
          {"label_column", s.label_column},
          {"feature_columns", s.feature_columns}};
}

ordered_json to_json(const EvalSection &s) {
  return {{"iou_threshold", s.iou_threshold}, {"num_classes", s.num_classes}};
}

std::string config_hash(const ordered_json &j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace kilnkit
