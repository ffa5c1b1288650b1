#pragma once

// Slow, direct implementations used as test oracles. They follow the
// definitions literally and share no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kiln/raster.hpp"
#include "kiln/rng.hpp"
#include "kiln/rs/kernels.hpp"

namespace oracle {

using kiln::Rng;
using kiln::raster::BinaryMask;
using kiln::raster::RasterGrid;
inline constexpr double kNoData = kiln::rs::kIndexNoData;

/// Index-like grid in [-1, 1]; a share of the pixels is NoData, and with
/// `ties` the values are quantized so that many pixels coincide.
inline RasterGrid random_index_grid(Rng &rng, std::size_t w, std::size_t h, bool ties = false) {
  RasterGrid g(w, h, 1, 0.0, kNoData);
  const int mode = static_cast<int>(rng.below(3));
  for (auto &v : g.data) {
    if (rng.uniform() < 0.05) {
      v = kNoData;
      continue;
    }
    if (mode == 0) v = rng.uniform(-1.0, 1.0);
    else if (mode == 1) v = std::clamp(rng.normal(rng.uniform() < 0.7 ? -0.3 : 0.5, 0.1), -1.0, 1.0);
    else v = std::round(rng.uniform(-1.0, 1.0) * 8.0) / 8.0;
    if (ties) v = std::round(v * 4.0) / 4.0;
  }
  g.data[0] = -0.9; // guarantee two distinct valid values
  g.data[1] = 0.9;
  return g;
}

inline std::vector<RasterGrid> random_stack(Rng &rng, std::size_t w, std::size_t h, std::size_t t,
                                            double nodata_share) {
  std::vector<RasterGrid> frames;
  for (std::size_t f = 0; f < t; ++f) {
    RasterGrid g(w, h, 1, 0.0, kNoData);
    for (auto &v : g.data) {
      v = rng.uniform() < nodata_share ? kNoData : std::round(rng.uniform(-1, 1) * 50.0) / 50.0;
    }
    frames.push_back(std::move(g));
  }
  return frames;
}

/// Per pixel: sort the valid samples, take the ceil(p n / 100)-th (integer p).
inline RasterGrid percentile_composite(const std::vector<RasterGrid> &frames, int p) {
  RasterGrid out(frames[0].width, frames[0].height, 1, 0.0, kNoData);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    std::vector<double> valid;
    for (const auto &f : frames)
      if (!(f.nodata && f.data[i] == *f.nodata)) valid.push_back(f.data[i]);
    if (valid.empty()) {
      out.data[i] = kNoData;
      continue;
    }
    std::sort(valid.begin(), valid.end());
    const std::size_t n = valid.size();
    const std::size_t rank = (static_cast<std::size_t>(p) * n + 99) / 100;
    out.data[i] = valid[std::max<std::size_t>(rank, 1) - 1];
  }
  return out;
}

/// Tries every bin edge and scores the two pixel classes it induces with exact
/// integer arithmetic: variance ~ (s0 n1 - s1 n0)^2 / (n0 n1) on bin levels.
inline double otsu_threshold(const RasterGrid &g, std::size_t bins) {
  double lo = 1e300, hi = -1e300;
  for (double v : g.data) {
    if (g.nodata && v == *g.nodata) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<std::int64_t> level;
  for (double v : g.data) {
    if (g.nodata && v == *g.nodata) continue;
    auto b = static_cast<std::int64_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
    level.push_back(std::min<std::int64_t>(b, static_cast<std::int64_t>(bins) - 1));
  }
  std::size_t best = 0;
  __int128 best_num = -1, best_den = 1;
  for (std::size_t edge = 1; edge <= bins; ++edge) {
    __int128 n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (auto l : level) {
      if (l < static_cast<std::int64_t>(edge)) {
        ++n0;
        s0 += l;
      } else {
        ++n1;
        s1 += l;
      }
    }
    __int128 num = 0, den = 1;
    if (n0 > 0 && n1 > 0) {
      const __int128 d = s0 * n1 - s1 * n0;
      num = d * d;
      den = n0 * n1;
    }
    // num / den > best_num / best_den, strictly: the lowest edge keeps ties.
    if (best_num < 0 || num * best_den > best_num * den) {
      best = edge;
      best_num = num;
      best_den = den;
    }
  }
  return lo + static_cast<double>(best) * (hi - lo) / static_cast<double>(bins);
}

inline BinaryMask local_maxima(const RasterGrid &g, std::size_t window) {
  const auto half = static_cast<std::int64_t>(window / 2);
  const auto w = static_cast<std::int64_t>(g.width), h = static_cast<std::int64_t>(g.height);
  BinaryMask out(g.width, g.height);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      const double x = g.data[std::size_t(r * w + c)];
      if (g.nodata && x == *g.nodata) continue;
      bool is_max = true;
      for (std::int64_t dr = -half; dr <= half; ++dr)
        for (std::int64_t dc = -half; dc <= half; ++dc) {
          const auto rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
          const double y = g.data[std::size_t(rr * w + cc)];
          if (g.nodata && y == *g.nodata) continue;
          if (y > x) is_max = false;
        }
      out.set(std::size_t(r), std::size_t(c), is_max);
    }
  }
  return out;
}

inline BinaryMask random_mask(Rng &rng, std::size_t w, std::size_t h, double density) {
  BinaryMask m(w, h);
  for (auto &b : m.bits) b = rng.uniform() < density ? 1 : 0;
  return m;
}

/// any (dilation) or all (erosion) over the in-image part of the square window.
inline BinaryMask window_op(const BinaryMask &m, std::size_t radius, bool any) {
  const auto r = static_cast<std::int64_t>(radius);
  const auto w = static_cast<std::int64_t>(m.width), h = static_cast<std::int64_t>(m.height);
  BinaryMask out(m.width, m.height);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      bool acc = !any;
      for (std::int64_t dy = -r; dy <= r; ++dy)
        for (std::int64_t dx = -r; dx <= r; ++dx) {
          const auto yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
          const bool v = m.get(std::size_t(yy), std::size_t(xx));
          acc = any ? (acc || v) : (acc && v);
        }
      out.set(std::size_t(y), std::size_t(x), acc);
    }
  return out;
}

inline BinaryMask dilate(const BinaryMask &m, std::size_t radius) { return window_op(m, radius, true); }
inline BinaryMask erode(const BinaryMask &m, std::size_t radius) { return window_op(m, radius, false); }

/// 8-connected components by stack flood fill, ordered by first pixel,
/// each with its pixels in row-major order.
inline std::vector<std::vector<kiln::geo::PixelIndex>> flood_fill_components(const BinaryMask &m) {
  const auto w = static_cast<std::int64_t>(m.width), h = static_cast<std::int64_t>(m.height);
  std::vector<int> label(m.bits.size(), 0);
  std::vector<std::vector<kiln::geo::PixelIndex>> out;
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      if (!m.get(std::size_t(r), std::size_t(c)) || label[std::size_t(r * w + c)]) continue;
      const int id = static_cast<int>(out.size()) + 1;
      std::vector<kiln::geo::PixelIndex> members, stack{{c, r}};
      label[std::size_t(r * w + c)] = id;
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        members.push_back(p);
        for (std::int64_t dr = -1; dr <= 1; ++dr)
          for (std::int64_t dc = -1; dc <= 1; ++dc) {
            const auto rr = p.row + dr, cc = p.col + dc;
            if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
            auto &l = label[std::size_t(rr * w + cc)];
            if (l || !m.get(std::size_t(rr), std::size_t(cc))) continue;
            l = id;
            stack.push_back({cc, rr});
          }
      }
      std::sort(members.begin(), members.end(),
                [](auto a, auto b) { return std::pair(a.row, a.col) < std::pair(b.row, b.col); });
      out.push_back(std::move(members));
    }
  return out;
}

} // namespace oracle
