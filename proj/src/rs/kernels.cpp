#include "kiln/rs/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>

#include "common.hpp"

namespace kiln::rs {

RasterGrid ndbki(const RasterGrid &rgb) {
  detail::require_rgb(rgb);
  RasterGrid out = detail::single_band_like(rgb, rgb.nodata.has_value());
  const auto r = rgb.band(0), g = rgb.band(1), b = rgb.band(2);
  auto o = out.band(0);
  const auto n = static_cast<std::int64_t>(rgb.pixels());

#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    if (rgb.is_nodata(r[i]) || rgb.is_nodata(g[i]) || rgb.is_nodata(b[i])) {
      o[i] = kIndexNoData;
    } else {
      o[i] = detail::ndbki_value(r[i], g[i], b[i]);
    }
  }
  return out;
}

RasterGrid percentile_composite(std::span<const RasterGrid> frames, double p) {
  detail::require_stack(frames, p);
  const auto &first = frames.front();
  RasterGrid out = detail::single_band_like(first, detail::any_nodata(frames));
  const auto n = static_cast<std::int64_t>(first.pixels());

#pragma omp parallel
  {
    std::vector<double> sample;
    sample.reserve(frames.size());
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      sample.clear();
      for (const auto &f : frames) {
        const double v = f.data[static_cast<std::size_t>(i)];
        if (!f.is_nodata(v)) sample.push_back(v);
      }
      if (sample.empty()) {
        out.data[static_cast<std::size_t>(i)] = kIndexNoData;
        continue;
      }
      const std::size_t k = detail::nearest_rank(p, sample.size()) - 1;
      std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(k),
                       sample.end());
      out.data[static_cast<std::size_t>(i)] = sample[k];
    }
  }
  return out;
}

double otsu_threshold(std::span<const RasterGrid *const> grids, std::size_t bins) {
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "otsu needs at least 2 bins");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const RasterGrid *g : grids) {
    const auto v = g->band(0);
    const auto n = static_cast<std::int64_t>(v.size());
#pragma omp parallel for reduction(min : lo) reduction(max : hi) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      if (g->is_nodata(v[i])) continue;
      lo = std::min(lo, v[i]);
      hi = std::max(hi, v[i]);
    }
  }
  if (!(lo < hi)) {
    throw Error(ErrorCode::DegenerateHistogram, "fewer than two distinct valid values");
  }

  std::vector<std::uint64_t> counts(bins, 0);
  for (const RasterGrid *g : grids) {
    const auto v = g->band(0);
    const auto n = static_cast<std::int64_t>(v.size());
#pragma omp parallel
    {
      std::vector<std::uint64_t> local(bins, 0);
#pragma omp for schedule(static) nowait
      for (std::int64_t i = 0; i < n; ++i) {
        if (!g->is_nodata(v[i])) ++local[detail::bin_of(v[i], lo, hi, bins)];
      }
#pragma omp critical
      for (std::size_t b = 0; b < bins; ++b) counts[b] += local[b];
    }
  }
  const std::size_t edge = detail::best_otsu_edge(counts);
  return lo + static_cast<double>(edge) * (hi - lo) / static_cast<double>(bins);
}

double otsu_threshold(const RasterGrid &grid, std::size_t bins) {
  const RasterGrid *one[] = {&grid};
  return otsu_threshold(std::span<const RasterGrid *const>(one), bins);
}

BinaryMask local_maxima(const RasterGrid &grid, std::size_t window) {
  detail::require_window(window);
  const std::size_t w = grid.width, h = grid.height;
  const auto half = static_cast<std::int64_t>(window / 2);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const auto v = grid.band(0);

  // Separable running max: rows first, then columns, with NoData as -inf.
  std::vector<double> row_max(w * h);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(h); ++r) {
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(w); ++c) {
      double m = kNegInf;
      const std::int64_t c0 = std::max<std::int64_t>(0, c - half);
      const std::int64_t c1 = std::min<std::int64_t>(static_cast<std::int64_t>(w) - 1, c + half);
      for (std::int64_t cc = c0; cc <= c1; ++cc) {
        const double x = v[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(cc)];
        if (!grid.is_nodata(x)) m = std::max(m, x);
      }
      row_max[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)] = m;
    }
  }

  BinaryMask out(w, h);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(h); ++r) {
    const std::int64_t r0 = std::max<std::int64_t>(0, r - half);
    const std::int64_t r1 = std::min<std::int64_t>(static_cast<std::int64_t>(h) - 1, r + half);
    for (std::size_t c = 0; c < w; ++c) {
      const double x = v[static_cast<std::size_t>(r) * w + c];
      if (grid.is_nodata(x)) continue;
      double m = kNegInf;
      for (std::int64_t rr = r0; rr <= r1; ++rr) {
        m = std::max(m, row_max[static_cast<std::size_t>(rr) * w + c]);
      }
      out.bits[static_cast<std::size_t>(r) * w + c] = x >= m ? 1 : 0;
    }
  }
  return out;
}

namespace {

// One separable pass of a square structuring element along rows (`along_rows`)
// or columns. `dilation` ORs the truncated window; otherwise ANDs it.
BinaryMask square_pass(const BinaryMask &in, std::size_t radius, bool along_rows, bool dilation) {
  const std::size_t w = in.width, h = in.height;
  const std::size_t lines = along_rows ? h : w;
  const std::size_t len = along_rows ? w : h;
  BinaryMask out(w, h);

#pragma omp parallel
  {
    std::vector<std::uint32_t> prefix(len + 1);
#pragma omp for schedule(static)
    for (std::int64_t li = 0; li < static_cast<std::int64_t>(lines); ++li) {
      const auto line = static_cast<std::size_t>(li);
      auto index = [&](std::size_t k) { return along_rows ? line * w + k : k * w + line; };
      prefix[0] = 0;
      for (std::size_t k = 0; k < len; ++k) prefix[k + 1] = prefix[k] + in.bits[index(k)];
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t a = k >= radius ? k - radius : 0;
        const std::size_t b = std::min(len - 1, k + radius);
        const std::uint32_t set = prefix[b + 1] - prefix[a];
        const bool v = dilation ? set > 0 : set == b - a + 1;
        out.bits[index(k)] = v ? 1 : 0;
      }
    }
  }
  return out;
}

} // namespace

BinaryMask dilate(const BinaryMask &mask, std::size_t radius) {
  return square_pass(square_pass(mask, radius, true, true), radius, false, true);
}

BinaryMask erode(const BinaryMask &mask, std::size_t radius) {
  return square_pass(square_pass(mask, radius, true, false), radius, false, false);
}

BinaryMask morphological_closing(const BinaryMask &mask, std::size_t radius) {
  if (radius < 1) throw Error(ErrorCode::InvalidArgument, "closing radius must be >= 1");
  return erode(dilate(mask, radius), radius);
}

BinaryMask above_threshold(const RasterGrid &grid, double threshold) {
  BinaryMask out(grid.width, grid.height);
  const auto v = grid.band(0);
  const auto n = static_cast<std::int64_t>(v.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out.bits[static_cast<std::size_t>(i)] = !grid.is_nodata(v[i]) && v[i] > threshold ? 1 : 0;
  }
  return out;
}

} // namespace kiln::rs
