#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kiln/bbox.hpp"
#include "kiln/rs/regions.hpp"

namespace kiln::geojson {

/// FeatureCollection with one Polygon feature per region, properties
/// {id, area_px, score}; ids follow input order. Compact, no trailing newline.
std::string to_string(std::span<const rs::DetectionRegion> regions);
void write_geojson(std::span<const rs::DetectionRegion> regions, const std::filesystem::path &path);

struct ScoredBox {
  BBox box;
  std::optional<double> score;
};

/// Bounds of each Polygon/MultiPolygon feature in lon/lat (x = lon, y = lat).
/// Box IoU is invariant to the per-axis scaling between pixels and degrees,
/// so these boxes compare directly with each other.
std::vector<ScoredBox> read_boxes(const std::filesystem::path &path);

/// CSV with header `x0,y0,x1,y1` (an optional `score` column is honored).
std::vector<ScoredBox> read_boxes_csv(const std::filesystem::path &path);

} // namespace kiln::geojson
