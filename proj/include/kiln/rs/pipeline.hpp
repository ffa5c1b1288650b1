#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kiln/raster.hpp"
#include "kiln/rs/regions.hpp"

namespace kiln::rs {

enum class ThresholdScope { Tile, Scene };

struct DetectConfig {
  double percentile = 80.0;
  std::size_t window = 9;
  std::size_t se_radius = 4;
  std::size_t bins = 256;
  ThresholdScope threshold_scope = ThresholdScope::Scene;
  /// Floor applied to the Otsu threshold. NDBKI > 0 means red dominates, so a
  /// scene without any red surface yields no candidates.
  double min_threshold = 0.0;
  HeightFilterConfig height;
  /// Worker count for tile-level parallelism; 0 means all logical cores.
  int jobs = 0;
};

/// One tile location with its RGB frames in time order. A tile that failed to
/// load carries the message in `load_error` and no frames.
struct TileFrames {
  std::string name;
  std::vector<RasterGrid> frames;
  std::optional<std::string> load_error;
};

struct TileReport {
  std::string name;
  std::optional<double> threshold;
  std::size_t regions_found = 0;
  std::size_t regions_rejected = 0;
  std::optional<std::string> error;
};

struct PipelineResult {
  /// Kept regions, ordered by the tile and component order of their first
  /// piece. Regions that touch across a tile seam are merged.
  std::vector<DetectionRegion> regions;
  /// Frame of region pixels and boxes: the mosaic of all processed tiles when
  /// they lie on one pixel grid. Unset otherwise; each region then stays in
  /// its own tile's frame and no seams are merged.
  std::optional<geo::GeoTransform> transform;
  std::vector<TileReport> tiles;
  std::size_t tiles_processed = 0;
  std::size_t regions_rejected_by_height = 0;

  bool partial_failure() const;
};

/// Reads `dir/<frame>/<tile>.kgrd` (or `.png` with a `.json` sidecar). Frame
/// subdirectories are taken in name order; tiles are grouped by file stem. A
/// tile that fails to read, or is absent from some frame, comes back with
/// `load_error` set. Throws InvalidArgument when no tile is found.
std::vector<TileFrames> load_tile_directory(const std::filesystem::path &dir,
                                            const raster::TileOptions &png = {});

/// Index -> composite -> seeds -> footprints -> closing -> components ->
/// height filter -> polygons. `heights` may be null, which skips the filter.
/// Per-tile failures are reported, not thrown.
PipelineResult run_pipeline(const std::vector<TileFrames> &tiles, const RasterGrid *heights,
                            const DetectConfig &cfg);

} // namespace kiln::rs
