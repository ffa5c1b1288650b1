#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kiln/geo.hpp"
#include "kiln/raster.hpp"

namespace kiln::graph {

struct PoiNode {
  std::int64_t id = 0;
  geo::GeoPoint location;
  std::vector<double> features;
  /// Parallel to `features`: true where the source cell was blank.
  std::vector<bool> missing;
  std::optional<int> label;

  bool has_missing() const;
};

/// Directed edge: node `src` aggregates messages from its neighbor `dst`.
/// The bearing is that of dst seen from src.
struct GraphEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double distance_m = 0.0;
  double bearing_rad = 0.0;
  friend bool operator==(const GraphEdge &, const GraphEdge &) = default;
};

struct SpatialGraph {
  std::vector<PoiNode> nodes;
  /// Sorted by (src, distance, neighbor id).
  std::vector<GraphEdge> edges;
  std::size_t k = 0;
  std::vector<std::string> feature_names;

  std::size_t feature_count() const { return feature_names.size(); }
};

struct PoiTable {
  std::vector<PoiNode> nodes;
  std::vector<std::string> feature_names;
  /// Rows skipped for a blank/invalid lon or lat, as "row N: reason".
  std::vector<std::string> rejected_rows;
};

/// Reads `id,lon,lat[,label],f_...` CSV. With `feature_columns` empty every
/// column other than id/lon/lat/label is a feature. An empty `label_column`
/// reads no labels. Blank feature cells are flagged as missing.
PoiTable load_pois(const std::filesystem::path &csv_path,
                   std::span<const std::string> feature_columns = {},
                   const std::string &label_column = "label");

/// Same, from CSV text already in memory.
PoiTable parse_pois(const std::string &csv_text, std::span<const std::string> feature_columns = {},
                    const std::string &label_column = "label");

/// Each node connects to its min(k, N - 1) nearest others by great-circle
/// distance; equal distances prefer the smaller node id.
SpatialGraph knn_edges(std::vector<PoiNode> nodes, std::size_t k = 8);

/// Per band of every raster: the sample at the node's pixel, else the mean of
/// valid samples in the (2 * buffer + 1)^2 window, else the band's global mean,
/// else 0 (with a warning appended to `warnings`).
std::vector<double> sample_features(const PoiNode &node, std::span<const raster::RasterGrid> rasters,
                                    std::size_t buffer_px = 3,
                                    std::vector<std::string> *warnings = nullptr);

/// Appends raster samples to every node's features, naming the new columns
/// `<prefix><raster>_b<band>`.
void append_raster_features(SpatialGraph &graph, std::span<const raster::RasterGrid> rasters,
                            std::size_t buffer_px = 3, std::vector<std::string> *warnings = nullptr);

/// Fills blank CSV feature cells with the mean of the valid values among the
/// node's graph neighbors, else the column mean, else 0 (with a warning).
void impute_features(SpatialGraph &graph, std::vector<std::string> *warnings = nullptr);

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Population mean/std per feature over the nodes flagged in `use`
/// (all nodes when empty).
FeatureStats fit_standardization(const SpatialGraph &graph, std::span<const std::uint8_t> use = {});

/// z-scores every node's features in place; zero-std columns become 0.
void apply_standardization(SpatialGraph &graph, const FeatureStats &stats);

std::string to_json(const SpatialGraph &graph);
SpatialGraph from_json(const std::string &text);
void write_graph(const SpatialGraph &graph, const std::filesystem::path &path);
SpatialGraph read_graph(const std::filesystem::path &path);

} // namespace kiln::graph
