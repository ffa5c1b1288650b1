#include "kiln/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "kiln/error.hpp"

namespace kiln::graph {

bool PoiNode::has_missing() const {
  return std::find(missing.begin(), missing.end(), true) != missing.end();
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

template <typename T> std::optional<T> parse_number(const std::string &s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

[[noreturn]] void non_numeric(std::size_t row, const std::string &column) {
  throw Error(ErrorCode::NonNumericCell,
              "row " + std::to_string(row) + ", column " + column + " is not numeric");
}

} // namespace

PoiTable parse_pois(const std::string &csv_text, std::span<const std::string> feature_columns,
                    const std::string &label_column) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, "empty CSV");
  const auto header = split_csv_line(line);
  auto find = [&](const std::string &name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = find("id"), lon_col = find("lon"), lat_col = find("lat");
  for (const auto &[col, name] : {std::pair{id_col, "id"}, {lon_col, "lon"}, {lat_col, "lat"}}) {
    if (!col) throw Error(ErrorCode::MissingColumn, std::string("CSV lacks column ") + name);
  }
  std::optional<std::size_t> label_col;
  if (!label_column.empty()) label_col = find(label_column);

  PoiTable table;
  std::vector<std::size_t> feature_idx;
  if (feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == *id_col || c == *lon_col || c == *lat_col || (label_col && c == *label_col)) continue;
      feature_idx.push_back(c);
      table.feature_names.push_back(header[c]);
    }
  } else {
    for (const auto &name : feature_columns) {
      const auto c = find(name);
      if (!c) throw Error(ErrorCode::MissingColumn, "CSV lacks feature column " + name);
      feature_idx.push_back(*c);
      table.feature_names.push_back(name);
    }
  }

  std::unordered_set<std::int64_t> seen;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    cells.resize(std::max(cells.size(), header.size()));

    const auto id = parse_number<std::int64_t>(cells[*id_col]);
    if (!id) non_numeric(row, "id");
    const auto &lon_s = cells[*lon_col];
    const auto &lat_s = cells[*lat_col];
    if (lon_s.empty() || lat_s.empty()) {
      table.rejected_rows.push_back("row " + std::to_string(row) + ": missing lon/lat");
      continue;
    }
    const auto lon = parse_number<double>(lon_s);
    const auto lat = parse_number<double>(lat_s);
    if (!lon) non_numeric(row, "lon");
    if (!lat) non_numeric(row, "lat");
    if (*lat < -90.0 || *lat > 90.0 || !std::isfinite(*lon)) {
      table.rejected_rows.push_back("row " + std::to_string(row) + ": coordinates out of range");
      continue;
    }
    if (!seen.insert(*id).second) {
      throw Error(ErrorCode::DuplicateId, "id " + std::to_string(*id) + " repeats at row " +
                                              std::to_string(row));
    }

    PoiNode node;
    node.id = *id;
    node.location = geo::make_point(*lon, *lat);
    for (std::size_t f = 0; f < feature_idx.size(); ++f) {
      const auto &cell = cells[feature_idx[f]];
      if (cell.empty()) {
        node.features.push_back(0.0);
        node.missing.push_back(true);
        continue;
      }
      const auto v = parse_number<double>(cell);
      if (!v) non_numeric(row, table.feature_names[f]);
      node.features.push_back(*v);
      node.missing.push_back(false);
    }
    if (label_col && !cells[*label_col].empty()) {
      const auto label = parse_number<int>(cells[*label_col]);
      if (!label || *label < 0) non_numeric(row, label_column);
      node.label = *label;
    }
    table.nodes.push_back(std::move(node));
  }
  return table;
}

PoiTable load_pois(const std::filesystem::path &csv_path,
                   std::span<const std::string> feature_columns, const std::string &label_column) {
  std::ifstream in(csv_path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + csv_path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_pois(text, feature_columns, label_column);
}

SpatialGraph knn_edges(std::vector<PoiNode> nodes, std::size_t k) {
  const std::size_t n = nodes.size();
  if (n < 2) throw Error(ErrorCode::SinglePoint, "k-NN graph needs at least two nodes");
  const std::size_t kk = std::min(k, n - 1);
  std::vector<std::vector<GraphEdge>> per_node(n);
  std::string failure;

#pragma omp parallel
  {
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(n);
#pragma omp for schedule(static)
    for (std::int64_t si = 0; si < static_cast<std::int64_t>(n); ++si) {
      const auto i = static_cast<std::size_t>(si);
      cand.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) cand.emplace_back(geo::haversine_distance(nodes[i].location, nodes[j].location), j);
      }
      auto closer = [&](const auto &a, const auto &b) {
        if (a.first != b.first) return a.first < b.first;
        return nodes[a.second].id < nodes[b.second].id;
      };
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end(),
                        closer);
      auto &out = per_node[i];
      try {
        for (std::size_t e = 0; e < kk; ++e) {
          const auto [d, j] = cand[e];
          out.push_back({i, j, d, geo::bearing(nodes[i].location, nodes[j].location)});
        }
      } catch (const Error &err) {
#pragma omp critical
        if (failure.empty()) {
          failure = "nodes " + std::to_string(nodes[i].id) + " share a location: " + err.what();
        }
      }
    }
  }
  if (!failure.empty()) throw Error(ErrorCode::DegenerateEdge, failure);

  SpatialGraph g;
  g.k = kk;
  g.edges.reserve(n * kk);
  for (auto &edges : per_node) g.edges.insert(g.edges.end(), edges.begin(), edges.end());
  g.nodes = std::move(nodes);
  return g;
}

namespace {

struct BandSummary {
  double global_mean = 0.0;
  bool any_valid = false;
};

BandSummary summarize_band(const raster::RasterGrid &grid, std::size_t band) {
  BandSummary s;
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : grid.band(band)) {
    if (grid.is_nodata(v)) continue;
    sum += v;
    ++count;
  }
  if (count > 0) {
    s.global_mean = sum / static_cast<double>(count);
    s.any_valid = true;
  }
  return s;
}

double sample_band(const raster::RasterGrid &grid, std::size_t band, const geo::PixelIndex &px,
                   std::size_t buffer, const BandSummary &summary, bool &fell_back_to_zero) {
  const auto w = static_cast<std::int64_t>(grid.width);
  const auto h = static_cast<std::int64_t>(grid.height);
  if (px.col >= 0 && px.row >= 0 && px.col < w && px.row < h) {
    const double v = grid.at(band, static_cast<std::size_t>(px.row), static_cast<std::size_t>(px.col));
    if (!grid.is_nodata(v)) return v;
  }
  const auto b = static_cast<std::int64_t>(buffer);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::int64_t r = std::max<std::int64_t>(0, px.row - b); r <= std::min(h - 1, px.row + b); ++r) {
    for (std::int64_t c = std::max<std::int64_t>(0, px.col - b); c <= std::min(w - 1, px.col + b);
         ++c) {
      const double v = grid.at(band, static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      if (grid.is_nodata(v)) continue;
      sum += v;
      ++count;
    }
  }
  if (count > 0) return sum / static_cast<double>(count);
  if (summary.any_valid) return summary.global_mean;
  fell_back_to_zero = true;
  return 0.0;
}

} // namespace

std::vector<double> sample_features(const PoiNode &node, std::span<const raster::RasterGrid> rasters,
                                    std::size_t buffer_px, std::vector<std::string> *warnings) {
  std::vector<double> out;
  for (std::size_t ri = 0; ri < rasters.size(); ++ri) {
    const auto &grid = rasters[ri];
    const auto px = geo::geo_to_pixel(grid.transform, node.location);
    for (std::size_t b = 0; b < grid.bands; ++b) {
      bool zero = false;
      out.push_back(sample_band(grid, b, px, buffer_px, summarize_band(grid, b), zero));
      if (zero && warnings) {
        warnings->push_back("raster " + std::to_string(ri) + " band " + std::to_string(b) +
                            " has no valid pixels; node " + std::to_string(node.id) + " set to 0");
      }
    }
  }
  return out;
}

void append_raster_features(SpatialGraph &graph, std::span<const raster::RasterGrid> rasters,
                            std::size_t buffer_px, std::vector<std::string> *warnings) {
  std::vector<std::vector<BandSummary>> summaries(rasters.size());
  for (std::size_t ri = 0; ri < rasters.size(); ++ri) {
    for (std::size_t b = 0; b < rasters[ri].bands; ++b) {
      summaries[ri].push_back(summarize_band(rasters[ri], b));
      graph.feature_names.push_back("raster" + std::to_string(ri) + "_b" + std::to_string(b));
      if (!summaries[ri].back().any_valid && warnings) {
        warnings->push_back("raster " + std::to_string(ri) + " band " + std::to_string(b) +
                            " has no valid pixels; filled with 0");
      }
    }
  }
  for (auto &node : graph.nodes) {
    for (std::size_t ri = 0; ri < rasters.size(); ++ri) {
      const auto px = geo::geo_to_pixel(rasters[ri].transform, node.location);
      for (std::size_t b = 0; b < rasters[ri].bands; ++b) {
        bool zero = false;
        node.features.push_back(sample_band(rasters[ri], b, px, buffer_px, summaries[ri][b], zero));
        node.missing.push_back(false);
      }
    }
  }
}

void impute_features(SpatialGraph &graph, std::vector<std::string> *warnings) {
  const std::size_t f_count = graph.feature_count();
  std::vector<double> column_mean(f_count, 0.0);
  std::vector<bool> column_valid(f_count, false);
  for (std::size_t f = 0; f < f_count; ++f) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto &node : graph.nodes) {
      if (node.missing[f]) continue;
      sum += node.features[f];
      ++count;
    }
    if (count > 0) {
      column_mean[f] = sum / static_cast<double>(count);
      column_valid[f] = true;
    } else if (warnings) {
      warnings->push_back("feature " + graph.feature_names[f] + " has no valid values; filled with 0");
    }
  }

  // Neighbor lists first, so fills read only original (non-imputed) values.
  std::vector<std::vector<std::size_t>> neighbors(graph.nodes.size());
  for (const auto &e : graph.edges) neighbors[e.src].push_back(e.dst);
  std::vector<PoiNode> filled = graph.nodes;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto &node = graph.nodes[i];
    for (std::size_t f = 0; f < f_count; ++f) {
      if (!node.missing[f]) continue;
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t j : neighbors[i]) {
        if (graph.nodes[j].missing[f]) continue;
        sum += graph.nodes[j].features[f];
        ++count;
      }
      filled[i].features[f] = count > 0 ? sum / static_cast<double>(count) : column_mean[f];
      filled[i].missing[f] = false;
    }
  }
  graph.nodes = std::move(filled);
}

FeatureStats fit_standardization(const SpatialGraph &graph, std::span<const std::uint8_t> use) {
  const std::size_t f_count = graph.feature_count();
  FeatureStats stats{std::vector<double>(f_count, 0.0), std::vector<double>(f_count, 0.0)};
  std::size_t n = 0;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    if (!use.empty() && !use[i]) continue;
    ++n;
    for (std::size_t f = 0; f < f_count; ++f) stats.mean[f] += graph.nodes[i].features[f];
  }
  if (n == 0) return stats;
  for (auto &m : stats.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    if (!use.empty() && !use[i]) continue;
    for (std::size_t f = 0; f < f_count; ++f) {
      const double d = graph.nodes[i].features[f] - stats.mean[f];
      stats.std[f] += d * d;
    }
  }
  for (auto &s : stats.std) s = std::sqrt(s / static_cast<double>(n));
  return stats;
}

void apply_standardization(SpatialGraph &graph, const FeatureStats &stats) {
  if (stats.mean.size() != graph.feature_count() || stats.std.size() != graph.feature_count()) {
    throw Error(ErrorCode::ShapeMismatch, "feature statistics do not match the graph");
  }
  for (auto &node : graph.nodes) {
    for (std::size_t f = 0; f < node.features.size(); ++f) {
      node.features[f] =
          stats.std[f] > 0.0 ? (node.features[f] - stats.mean[f]) / stats.std[f] : 0.0;
    }
  }
}

std::string to_json(const SpatialGraph &graph) {
  nlohmann::ordered_json j;
  auto &nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto &n : graph.nodes) {
    nlohmann::ordered_json node;
    node["id"] = n.id;
    node["lon"] = n.location.lon;
    node["lat"] = n.location.lat;
    node["label"] = n.label ? nlohmann::ordered_json(*n.label) : nlohmann::ordered_json(nullptr);
    node["features"] = n.features;
    if (n.has_missing()) node["missing"] = n.missing;
    nodes.push_back(std::move(node));
  }
  auto &edges = j["edges"] = nlohmann::ordered_json::array();
  for (const auto &e : graph.edges) {
    edges.push_back({{"src", e.src},
                     {"dst", e.dst},
                     {"distance_m", e.distance_m},
                     {"bearing_rad", e.bearing_rad}});
  }
  j["k"] = graph.k;
  j["feature_names"] = graph.feature_names;
  return j.dump();
}

SpatialGraph from_json(const std::string &text) {
  SpatialGraph g;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto &jn : j.at("nodes")) {
      PoiNode n;
      n.id = jn.at("id").get<std::int64_t>();
      n.location = {jn.at("lon").get<double>(), jn.at("lat").get<double>()};
      if (!jn.at("label").is_null()) n.label = jn.at("label").get<int>();
      n.features = jn.at("features").get<std::vector<double>>();
      if (jn.contains("missing")) {
        n.missing = jn.at("missing").get<std::vector<bool>>();
      } else {
        n.missing.assign(n.features.size(), false);
      }
      g.nodes.push_back(std::move(n));
    }
    for (const auto &je : j.at("edges")) {
      g.edges.push_back({je.at("src").get<std::size_t>(), je.at("dst").get<std::size_t>(),
                         je.at("distance_m").get<double>(), je.at("bearing_rad").get<double>()});
    }
    g.k = j.at("k").get<std::size_t>();
    g.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::InvalidArgument, std::string("graph JSON: ") + e.what());
  }
  for (const auto &n : g.nodes) {
    if (n.features.size() != g.feature_count() || n.missing.size() != n.features.size()) {
      throw Error(ErrorCode::ShapeMismatch, "node " + std::to_string(n.id) +
                                                " feature length differs from feature_names");
    }
  }
  for (const auto &e : g.edges) {
    if (e.src >= g.nodes.size() || e.dst >= g.nodes.size() || e.src == e.dst) {
      throw Error(ErrorCode::InvalidArgument, "graph JSON has an invalid edge");
    }
  }
  return g;
}

void write_graph(const SpatialGraph &graph, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json(graph) << '\n';
}

SpatialGraph read_graph(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

} // namespace kiln::graph
