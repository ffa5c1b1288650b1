#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kiln/raster.hpp"

// Per-pixel raster kernels of the detection pipeline. The functions in
// kiln::rs are OpenMP-parallel; kiln::rs::reference holds straightforward
// serial versions that the tests and the benchmark compare against. Both
// produce identical results.

namespace kiln::rs {

using raster::BinaryMask;
using raster::RasterGrid;

/// Sentinel used by every derived single-band grid (index, composite).
inline constexpr double kIndexNoData = -9999.0;

/// (R - max(G, B)) / (R + max(G, B)), 0 where the denominator is 0, clamped to
/// [-1, 1]. NoData in any band gives NoData.
RasterGrid ndbki(const RasterGrid &rgb);

/// Per-pixel nearest-rank percentile over the frames' valid samples: the
/// ceil(p / 100 * n)-th smallest of n values. NoData only where no frame is valid.
RasterGrid percentile_composite(std::span<const RasterGrid> frames, double p = 80.0);

/// Otsu threshold on a `bins`-bin histogram spanning the valid [min, max].
/// Candidates are the interior and upper bin edges min + i * (max - min) / bins,
/// i = 1..bins; the lowest edge among equal between-class variances wins.
double otsu_threshold(const RasterGrid &grid, std::size_t bins = 256);

/// Same, with one histogram pooled over several grids (scene-wide threshold).
double otsu_threshold(std::span<const RasterGrid *const> grids, std::size_t bins = 256);

/// True where the pixel is >= every valid pixel of the window x window
/// neighborhood (truncated at the borders). NoData pixels are never maxima.
BinaryMask local_maxima(const RasterGrid &grid, std::size_t window = 9);

/// Square structuring element of side 2r + 1. Outside the image counts as
/// background for dilation and is ignored by erosion.
BinaryMask dilate(const BinaryMask &mask, std::size_t radius);
BinaryMask erode(const BinaryMask &mask, std::size_t radius);
BinaryMask morphological_closing(const BinaryMask &mask, std::size_t radius = 4);

/// Pixels strictly above `threshold` (NoData excluded).
BinaryMask above_threshold(const RasterGrid &grid, double threshold);

namespace reference {

RasterGrid ndbki(const RasterGrid &rgb);
RasterGrid percentile_composite(std::span<const RasterGrid> frames, double p = 80.0);
double otsu_threshold(const RasterGrid &grid, std::size_t bins = 256);
BinaryMask local_maxima(const RasterGrid &grid, std::size_t window = 9);
BinaryMask dilate(const BinaryMask &mask, std::size_t radius);
BinaryMask erode(const BinaryMask &mask, std::size_t radius);
BinaryMask morphological_closing(const BinaryMask &mask, std::size_t radius = 4);

} // namespace reference

} // namespace kiln::rs
