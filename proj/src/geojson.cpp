#include "kiln/geojson.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "kiln/error.hpp"

namespace kiln::geojson {

using ordered_json = nlohmann::ordered_json;

std::string to_string(std::span<const rs::DetectionRegion> regions) {
  ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = ordered_json::array();
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto &region = regions[i];
    ordered_json rings = ordered_json::array();
    for (const auto &ring : region.polygon) {
      if (ring.size() < 4 || ring.front().lon != ring.back().lon ||
          ring.front().lat != ring.back().lat) {
        throw Error(ErrorCode::InvalidArgument, "polygon rings must be closed with >= 4 vertices");
      }
      ordered_json coords = ordered_json::array();
      for (const auto &p : ring) coords.push_back({p.lon, p.lat});
      rings.push_back(std::move(coords));
    }
    ordered_json feature;
    feature["type"] = "Feature";
    feature["geometry"] = {{"type", "Polygon"}, {"coordinates", std::move(rings)}};
    feature["properties"] = {{"id", i}, {"area_px", region.pixels.size()}, {"score", region.score}};
    fc["features"].push_back(std::move(feature));
  }
  return fc.dump();
}

void write_geojson(std::span<const rs::DetectionRegion> regions, const std::filesystem::path &path) {
  const std::string text = to_string(regions);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

namespace {

void extend(BBox &box, const nlohmann::json &ring) {
  for (const auto &pt : ring) {
    const double x = pt.at(0).get<double>(), y = pt.at(1).get<double>();
    box.x0 = std::min(box.x0, x);
    box.y0 = std::min(box.y0, y);
    box.x1 = std::max(box.x1, x);
    box.y1 = std::max(box.y1, y);
  }
}

} // namespace

std::vector<ScoredBox> read_boxes(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  std::vector<ScoredBox> boxes;
  try {
    for (const auto &feature : doc.at("features")) {
      const auto &geom = feature.at("geometry");
      const std::string type = geom.at("type").get<std::string>();
      constexpr double inf = std::numeric_limits<double>::infinity();
      BBox box{inf, inf, -inf, -inf};
      if (type == "Polygon") {
        for (const auto &ring : geom.at("coordinates")) extend(box, ring);
      } else if (type == "MultiPolygon") {
        for (const auto &poly : geom.at("coordinates")) {
          for (const auto &ring : poly) extend(box, ring);
        }
      } else {
        throw Error(ErrorCode::InvalidArgument, "unsupported geometry type " + type);
      }
      ScoredBox sb{box, std::nullopt};
      if (feature.contains("properties") && feature["properties"].is_object() &&
          feature["properties"].contains("score") && feature["properties"]["score"].is_number()) {
        sb.score = feature["properties"]["score"].get<double>();
      }
      boxes.push_back(sb);
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return boxes;
}

namespace {

/// Comma split that keeps empty trailing cells and drops a CR line ending.
std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

} // namespace

std::vector<ScoredBox> read_boxes_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) return {};
  const std::vector<std::string> header = split_csv_line(line);
  auto column = [&](const std::string &name) -> std::ptrdiff_t {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const std::ptrdiff_t cols[4] = {column("x0"), column("y0"), column("x1"), column("y1")};
  for (auto c : cols) {
    if (c < 0) throw Error(ErrorCode::MissingColumn, path.string() + " needs x0,y0,x1,y1");
  }
  const std::ptrdiff_t score_col = column("score");
  std::vector<ScoredBox> boxes;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() == 1 && cells[0].empty()) continue;
    auto number = [&](std::ptrdiff_t c) {
      if (c >= static_cast<std::ptrdiff_t>(cells.size())) {
        throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(row) + " is short");
      }
      const auto &text = cells[static_cast<std::size_t>(c)];
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used == 0 || text.find_first_not_of(" \t\r", used) != std::string::npos) {
        throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(row) + ", column " +
                                                   header[static_cast<std::size_t>(c)]);
      }
      return v;
    };
    ScoredBox sb{{number(cols[0]), number(cols[1]), number(cols[2]), number(cols[3])},
                 std::nullopt};
    if (score_col >= 0 && score_col < static_cast<std::ptrdiff_t>(cells.size()) &&
        !cells[static_cast<std::size_t>(score_col)].empty()) {
      sb.score = number(score_col);
    }
    boxes.push_back(sb);
  }
  return boxes;
}

} // namespace kiln::geojson
