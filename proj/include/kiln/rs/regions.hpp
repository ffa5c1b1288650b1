#pragma once

#include <cstddef>
#include <vector>

#include "kiln/bbox.hpp"
#include "kiln/geo.hpp"
#include "kiln/raster.hpp"

namespace kiln::rs {

using raster::BinaryMask;
using raster::RasterGrid;

/// Closed ring of lon/lat vertices; the first vertex is repeated last.
using Ring = std::vector<geo::GeoPoint>;

struct DetectionRegion {
  int label_id = 0;
  /// Member pixels in row-major order.
  std::vector<geo::PixelIndex> pixels;
  /// Outer ring (counterclockwise) first, then holes (clockwise).
  std::vector<Ring> polygon;
  /// Pixel-edge box of the member pixels.
  BBox bbox;
  double score = 0.0;
};

/// (grid > threshold) AND local maximum over the window.
BinaryMask candidate_seeds(const RasterGrid &ndbki80, double threshold, std::size_t window = 9);

/// Same, with the Otsu threshold of the grid itself.
BinaryMask candidate_seeds_otsu(const RasterGrid &ndbki80, std::size_t window = 9);

/// Union of the 8-connected above-threshold components that contain a seed.
BinaryMask grow_footprints(const BinaryMask &seeds, const RasterGrid &ndbki80, double threshold);

/// 8-connected labeling. Regions come out ordered by their first pixel in
/// row-major order, labels starting at 1. Polygons are left empty.
std::vector<DetectionRegion> connected_components(const BinaryMask &mask);

/// Mean of the grid over the region's pixels (NoData skipped).
double region_score(const DetectionRegion &region, const RasterGrid &grid);

struct HeightFilterConfig {
  /// Pixels above this height are buildings.
  double building_height_m = 0.5;
  /// Buildings above this height are "tall".
  double tall_height_m = 3.0;
  /// Reject when the tall share of building pixels exceeds this.
  double max_tall_fraction = 0.1;
};

struct HeightVerdict {
  bool keep = true;
  std::size_t building_pixels = 0;
  std::size_t tall_pixels = 0;
};

/// Samples `heights` at the geographic center of each region pixel (through
/// `region_transform`), so the height raster may cover a different extent.
/// Pixels falling outside the height grid or on NoData count as no building.
HeightVerdict height_filter(const DetectionRegion &region, const geo::GeoTransform &region_transform,
                            const RasterGrid &heights, const HeightFilterConfig &cfg = {});

/// Traces the exterior pixel edges of the region into lon/lat rings: the
/// outer ring counterclockwise, holes clockwise, collinear vertices merged.
std::vector<Ring> vectorize(const DetectionRegion &region, const geo::GeoTransform &transform);

} // namespace kiln::rs
