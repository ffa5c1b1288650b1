#include "kiln/rs/regions.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <tuple>

#include "kiln/error.hpp"
#include "kiln/rs/kernels.hpp"

namespace kiln::rs {

BinaryMask candidate_seeds(const RasterGrid &ndbki80, double threshold, std::size_t window) {
  BinaryMask seeds = local_maxima(ndbki80, window);
  const BinaryMask above = above_threshold(ndbki80, threshold);
  for (std::size_t i = 0; i < seeds.bits.size(); ++i) seeds.bits[i] &= above.bits[i];
  return seeds;
}

BinaryMask candidate_seeds_otsu(const RasterGrid &ndbki80, std::size_t window) {
  return candidate_seeds(ndbki80, otsu_threshold(ndbki80), window);
}

namespace {

constexpr std::array<std::array<int, 2>, 8> kNeighbors8 = {
    {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

// Breadth-first 8-connected flood from `start` over `allowed`, marking `visited`.
template <typename Visit>
void flood(const BinaryMask &allowed, std::vector<std::uint8_t> &visited, std::size_t start,
           Visit &&visit) {
  const auto w = static_cast<std::int64_t>(allowed.width);
  const auto h = static_cast<std::int64_t>(allowed.height);
  std::deque<std::size_t> queue{start};
  visited[start] = 1;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    visit(i);
    const auto r = static_cast<std::int64_t>(i) / w;
    const auto c = static_cast<std::int64_t>(i) % w;
    for (const auto &[dr, dc] : kNeighbors8) {
      const std::int64_t rr = r + dr, cc = c + dc;
      if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
      const auto j = static_cast<std::size_t>(rr * w + cc);
      if (allowed.bits[j] && !visited[j]) {
        visited[j] = 1;
        queue.push_back(j);
      }
    }
  }
}

} // namespace

BinaryMask grow_footprints(const BinaryMask &seeds, const RasterGrid &ndbki80, double threshold) {
  if (seeds.width != ndbki80.width || seeds.height != ndbki80.height) {
    throw Error(ErrorCode::DimensionMismatch, "seed mask and composite differ in size");
  }
  const BinaryMask above = above_threshold(ndbki80, threshold);
  BinaryMask out(seeds.width, seeds.height);
  std::vector<std::uint8_t> visited(above.bits.size(), 0);
  for (std::size_t i = 0; i < seeds.bits.size(); ++i) {
    if (seeds.bits[i] && above.bits[i] && !visited[i]) {
      flood(above, visited, i, [&](std::size_t j) { out.bits[j] = 1; });
    }
  }
  return out;
}

std::vector<DetectionRegion> connected_components(const BinaryMask &mask) {
  std::vector<DetectionRegion> regions;
  std::vector<std::uint8_t> visited(mask.bits.size(), 0);
  const std::size_t w = mask.width;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (!mask.bits[i] || visited[i]) continue;
    DetectionRegion region;
    region.label_id = static_cast<int>(regions.size()) + 1;
    std::vector<std::size_t> members;
    flood(mask, visited, i, [&](std::size_t j) { members.push_back(j); });
    std::sort(members.begin(), members.end());
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
    double x1 = -x0, y1 = -x0;
    region.pixels.reserve(members.size());
    for (std::size_t j : members) {
      const auto col = static_cast<std::int64_t>(j % w), row = static_cast<std::int64_t>(j / w);
      region.pixels.push_back({col, row});
      x0 = std::min(x0, static_cast<double>(col));
      y0 = std::min(y0, static_cast<double>(row));
      x1 = std::max(x1, static_cast<double>(col + 1));
      y1 = std::max(y1, static_cast<double>(row + 1));
    }
    region.bbox = {x0, y0, x1, y1};
    regions.push_back(std::move(region));
  }
  return regions;
}

double region_score(const DetectionRegion &region, const RasterGrid &grid) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto &p : region.pixels) {
    const double v = grid.at(0, static_cast<std::size_t>(p.row), static_cast<std::size_t>(p.col));
    if (grid.is_nodata(v)) continue;
    sum += v;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

HeightVerdict height_filter(const DetectionRegion &region, const geo::GeoTransform &region_transform,
                            const RasterGrid &heights, const HeightFilterConfig &cfg) {
  HeightVerdict verdict;
  for (const auto &p : region.pixels) {
    const auto where = geo::pixel_to_geo(region_transform, static_cast<double>(p.col),
                                         static_cast<double>(p.row));
    const auto hp = geo::geo_to_pixel(heights.transform, where);
    if (hp.col < 0 || hp.row < 0 || hp.col >= static_cast<std::int64_t>(heights.width) ||
        hp.row >= static_cast<std::int64_t>(heights.height)) {
      continue;
    }
    const double h =
        heights.at(0, static_cast<std::size_t>(hp.row), static_cast<std::size_t>(hp.col));
    if (heights.is_nodata(h) || !(h > cfg.building_height_m)) continue;
    ++verdict.building_pixels;
    if (h > cfg.tall_height_m) ++verdict.tall_pixels;
  }
  if (verdict.building_pixels > 0) {
    const double share =
        static_cast<double>(verdict.tall_pixels) / static_cast<double>(verdict.building_pixels);
    verdict.keep = !(share > cfg.max_tall_fraction);
  }
  return verdict;
}

namespace {

struct Edge {
  std::int64_t x0, y0, x1, y1;
  std::int64_t dx() const { return x1 - x0; }
  std::int64_t dy() const { return y1 - y0; }
};

} // namespace

std::vector<Ring> vectorize(const DetectionRegion &region, const geo::GeoTransform &transform) {
  if (region.pixels.empty()) {
    throw Error(ErrorCode::InvalidArgument, "cannot vectorize an empty region");
  }
  std::int64_t c0 = std::numeric_limits<std::int64_t>::max(), r0 = c0, c1 = -1, r1 = -1;
  for (const auto &p : region.pixels) {
    c0 = std::min(c0, p.col);
    r0 = std::min(r0, p.row);
    c1 = std::max(c1, p.col);
    r1 = std::max(r1, p.row);
  }
  const std::int64_t bw = c1 - c0 + 1, bh = r1 - r0 + 1;
  std::vector<std::uint8_t> inside(static_cast<std::size_t>(bw * bh), 0);
  for (const auto &p : region.pixels) {
    inside[static_cast<std::size_t>((p.row - r0) * bw + (p.col - c0))] = 1;
  }
  auto member = [&](std::int64_t c, std::int64_t r) {
    if (c < c0 || c > c1 || r < r0 || r > r1) return false;
    return inside[static_cast<std::size_t>((r - r0) * bw + (c - c0))] != 0;
  };

  // Directed boundary edges in image coordinates (y down), oriented so that a
  // y-up view sees the region on the left: outer boundaries counterclockwise.
  std::vector<Edge> edges;
  for (const auto &p : region.pixels) {
    const std::int64_t c = p.col, r = p.row;
    if (!member(c, r + 1)) edges.push_back({c, r + 1, c + 1, r + 1});
    if (!member(c + 1, r)) edges.push_back({c + 1, r + 1, c + 1, r});
    if (!member(c, r - 1)) edges.push_back({c + 1, r, c, r});
    if (!member(c - 1, r)) edges.push_back({c, r, c, r + 1});
  }
  std::sort(edges.begin(), edges.end(), [](const Edge &a, const Edge &b) {
    return std::tie(a.y0, a.x0, a.y1, a.x1) < std::tie(b.y0, b.x0, b.y1, b.x1);
  });

  // At most two edges leave any vertex (two only where pixels touch diagonally).
  const std::int64_t vw = bw + 1;
  auto vertex = [&](std::int64_t x, std::int64_t y) {
    return static_cast<std::size_t>((y - r0) * vw + (x - c0));
  };
  std::vector<std::array<std::int64_t, 2>> outgoing(static_cast<std::size_t>(vw * (bh + 1)),
                                                    {-1, -1});
  for (std::size_t i = 0; i < edges.size(); ++i) {
    auto &slot = outgoing[vertex(edges[i].x0, edges[i].y0)];
    (slot[0] < 0 ? slot[0] : slot[1]) = static_cast<std::int64_t>(i);
  }

  std::vector<std::uint8_t> used(edges.size(), 0);
  std::vector<std::vector<std::array<std::int64_t, 2>>> rings_px;
  for (std::size_t start = 0; start < edges.size(); ++start) {
    if (used[start]) continue;
    std::vector<std::array<std::int64_t, 2>> ring;
    std::size_t cur = start;
    do {
      used[cur] = 1;
      const Edge &e = edges[cur];
      ring.push_back({e.x0, e.y0});
      const auto &slot = outgoing[vertex(e.x1, e.y1)];
      std::int64_t next = slot[0];
      if (slot[1] >= 0) {
        // Diagonal contact: turn so the two pixels stay on one ring, which
        // keeps the outline consistent with 8-connected regions.
        const Edge &a = edges[static_cast<std::size_t>(slot[0])];
        const std::int64_t cross = e.dx() * a.dy() - e.dy() * a.dx();
        next = cross > 0 ? slot[0] : slot[1];
      }
      cur = static_cast<std::size_t>(next);
    } while (cur != start);

    // Drop vertices lying on a straight run.
    std::vector<std::array<std::int64_t, 2>> simple;
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto &prev = ring[(i + n - 1) % n];
      const auto &v = ring[i];
      const auto &next = ring[(i + 1) % n];
      const std::int64_t cross =
          (v[0] - prev[0]) * (next[1] - v[1]) - (v[1] - prev[1]) * (next[0] - v[0]);
      if (cross != 0) simple.push_back(v);
    }
    rings_px.push_back(std::move(simple));
  }

  auto image_area2 = [](const std::vector<std::array<std::int64_t, 2>> &ring) {
    std::int64_t a = 0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const auto &p = ring[i];
      const auto &q = ring[(i + 1) % ring.size()];
      a += p[0] * q[1] - q[0] * p[1];
    }
    return a;
  };
  // Outer rings have negative area in y-down image coordinates.
  std::stable_partition(rings_px.begin(), rings_px.end(),
                        [&](const auto &ring) { return image_area2(ring) < 0; });

  // A south-up grid mirrors the image, so flip orientation to keep the outer
  // ring counterclockwise in lon/lat.
  const bool flip = (transform.pixel_width > 0) == (transform.pixel_height > 0);
  std::vector<Ring> rings;
  for (auto &ring_px : rings_px) {
    if (flip) std::reverse(ring_px.begin() + 1, ring_px.end());
    Ring ring;
    ring.reserve(ring_px.size() + 1);
    for (const auto &v : ring_px) {
      ring.push_back(geo::pixel_corner_to_geo(transform, static_cast<double>(v[0]),
                                              static_cast<double>(v[1])));
    }
    ring.push_back(ring.front());
    rings.push_back(std::move(ring));
  }
  return rings;
}

} // namespace kiln::rs
