#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kiln/error.hpp"
#include "kiln/raster.hpp"
#include "kiln/rs/kernels.hpp"

namespace kiln::rs::detail {

inline void require_rgb(const RasterGrid &rgb) {
  rgb.validate();
  if (rgb.bands != 3) {
    throw Error(ErrorCode::BandCountMismatch,
                "expected 3 bands, got " + std::to_string(rgb.bands));
  }
}

inline void require_stack(std::span<const RasterGrid> frames, double p) {
  if (frames.empty()) throw Error(ErrorCode::EmptyStack, "percentile composite of zero frames");
  if (!(p > 0.0 && p <= 100.0)) {
    throw Error(ErrorCode::InvalidArgument, "percentile must lie in (0, 100]");
  }
  const auto &first = frames.front();
  for (const auto &f : frames) {
    f.validate();
    if (f.bands != 1 || f.width != first.width || f.height != first.height ||
        !(f.transform == first.transform)) {
      throw Error(ErrorCode::DimensionMismatch, "stack frames differ in shape or transform");
    }
  }
}

inline void require_window(std::size_t window) {
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "window must be odd and >= 3");
  }
}

inline bool any_nodata(std::span<const RasterGrid> frames) {
  for (const auto &f : frames) {
    if (f.nodata) return true;
  }
  return false;
}

inline double ndbki_value(double r, double g, double b) {
  const double m = std::max(g, b);
  const double den = r + m;
  if (den == 0.0) return 0.0;
  return std::clamp((r - m) / den, -1.0, 1.0);
}

/// 1-based nearest rank of the p-th percentile among n samples.
inline std::size_t nearest_rank(double p, std::size_t n) {
  const double rank = std::ceil(p * static_cast<double>(n) / 100.0);
  return std::clamp<std::size_t>(static_cast<std::size_t>(rank), 1, n);
}

inline std::size_t bin_of(double v, double lo, double hi, std::size_t bins) {
  const auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
  return std::min(b, bins - 1);
}

/// Between-class variance (up to the constant factor width^2 / n^2) of the
/// split "bins below i" vs "bins from i", with bin indices as levels.
/// Counts and index sums are integers, so they are exact in double.
inline double between_class_variance(double n0, double s0, double n1, double s1) {
  if (n0 == 0.0 || n1 == 0.0) return 0.0;
  const double diff = s0 / n0 - s1 / n1;
  return n0 * n1 * diff * diff;
}

/// Edge index i in [1, bins] maximizing the between-class variance; lowest wins ties.
inline std::size_t best_otsu_edge(std::span<const std::uint64_t> counts) {
  double total_n = 0.0, total_s = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    total_n += static_cast<double>(counts[i]);
    total_s += static_cast<double>(i) * static_cast<double>(counts[i]);
  }
  std::size_t best = 1;
  double best_var = -1.0;
  double n0 = 0.0, s0 = 0.0;
  for (std::size_t i = 1; i <= counts.size(); ++i) {
    n0 += static_cast<double>(counts[i - 1]);
    s0 += static_cast<double>(i - 1) * static_cast<double>(counts[i - 1]);
    const double var = between_class_variance(n0, s0, total_n - n0, total_s - s0);
    if (var > best_var) {
      best_var = var;
      best = i;
    }
  }
  return best;
}

inline RasterGrid single_band_like(const RasterGrid &src, bool with_nodata) {
  return RasterGrid(src.width, src.height, 1, 0.0,
                    with_nodata ? std::optional<double>(kIndexNoData) : std::nullopt,
                    src.transform);
}

} // namespace kiln::rs::detail
