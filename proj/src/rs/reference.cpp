#include <algorithm>
#include <cstdint>
#include <limits>

#include "common.hpp"
#include "kiln/rs/kernels.hpp"

namespace kiln::rs::reference {

RasterGrid ndbki(const RasterGrid &rgb) {
  detail::require_rgb(rgb);
  RasterGrid out = detail::single_band_like(rgb, rgb.nodata.has_value());
  for (std::size_t row = 0; row < rgb.height; ++row) {
    for (std::size_t col = 0; col < rgb.width; ++col) {
      const double r = rgb.at(0, row, col), g = rgb.at(1, row, col), b = rgb.at(2, row, col);
      const bool missing = rgb.is_nodata(r) || rgb.is_nodata(g) || rgb.is_nodata(b);
      out.at(0, row, col) = missing ? kIndexNoData : detail::ndbki_value(r, g, b);
    }
  }
  return out;
}

RasterGrid percentile_composite(std::span<const RasterGrid> frames, double p) {
  detail::require_stack(frames, p);
  RasterGrid out = detail::single_band_like(frames.front(), detail::any_nodata(frames));
  std::vector<double> sample;
  for (std::size_t i = 0; i < out.pixels(); ++i) {
    sample.clear();
    for (const auto &f : frames) {
      if (!f.is_nodata(f.data[i])) sample.push_back(f.data[i]);
    }
    if (sample.empty()) {
      out.data[i] = kIndexNoData;
      continue;
    }
    std::sort(sample.begin(), sample.end());
    out.data[i] = sample[detail::nearest_rank(p, sample.size()) - 1];
  }
  return out;
}

double otsu_threshold(const RasterGrid &grid, std::size_t bins) {
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "otsu needs at least 2 bins");
  std::vector<double> valid;
  for (double v : grid.band(0)) {
    if (!grid.is_nodata(v)) valid.push_back(v);
  }
  if (valid.empty()) throw Error(ErrorCode::DegenerateHistogram, "no valid pixels");
  const auto [lo_it, hi_it] = std::minmax_element(valid.begin(), valid.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(lo < hi)) throw Error(ErrorCode::DegenerateHistogram, "all valid pixels are equal");
  std::vector<std::uint64_t> counts(bins, 0);
  for (double v : valid) ++counts[detail::bin_of(v, lo, hi, bins)];
  const std::size_t edge = detail::best_otsu_edge(counts);
  return lo + static_cast<double>(edge) * (hi - lo) / static_cast<double>(bins);
}

BinaryMask local_maxima(const RasterGrid &grid, std::size_t window) {
  detail::require_window(window);
  const auto half = static_cast<std::int64_t>(window / 2);
  const auto w = static_cast<std::int64_t>(grid.width);
  const auto h = static_cast<std::int64_t>(grid.height);
  BinaryMask out(grid.width, grid.height);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      const double x = grid.at(0, static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      if (grid.is_nodata(x)) continue;
      bool is_max = true;
      for (std::int64_t rr = std::max<std::int64_t>(0, r - half);
           is_max && rr <= std::min(h - 1, r + half); ++rr) {
        for (std::int64_t cc = std::max<std::int64_t>(0, c - half);
             cc <= std::min(w - 1, c + half); ++cc) {
          const double y = grid.at(0, static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
          if (!grid.is_nodata(y) && y > x) {
            is_max = false;
            break;
          }
        }
      }
      out.set(static_cast<std::size_t>(r), static_cast<std::size_t>(c), is_max);
    }
  }
  return out;
}

namespace {

BinaryMask square_window(const BinaryMask &in, std::size_t radius, bool dilation) {
  const auto w = static_cast<std::int64_t>(in.width);
  const auto h = static_cast<std::int64_t>(in.height);
  const auto rad = static_cast<std::int64_t>(radius);
  BinaryMask out(in.width, in.height);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      bool any = false, all = true;
      for (std::int64_t rr = std::max<std::int64_t>(0, r - rad); rr <= std::min(h - 1, r + rad);
           ++rr) {
        for (std::int64_t cc = std::max<std::int64_t>(0, c - rad);
             cc <= std::min(w - 1, c + rad); ++cc) {
          const bool v = in.get(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
          any = any || v;
          all = all && v;
        }
      }
      out.set(static_cast<std::size_t>(r), static_cast<std::size_t>(c), dilation ? any : all);
    }
  }
  return out;
}

} // namespace

BinaryMask dilate(const BinaryMask &mask, std::size_t radius) {
  return square_window(mask, radius, true);
}

BinaryMask erode(const BinaryMask &mask, std::size_t radius) {
  return square_window(mask, radius, false);
}

BinaryMask morphological_closing(const BinaryMask &mask, std::size_t radius) {
  if (radius < 1) throw Error(ErrorCode::InvalidArgument, "closing radius must be >= 1");
  return erode(dilate(mask, radius), radius);
}

} // namespace kiln::rs::reference
