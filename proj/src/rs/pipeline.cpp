#include "kiln/rs/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <unordered_map>

#include "kiln/error.hpp"
#include "kiln/rs/kernels.hpp"

namespace kiln::rs {

bool PipelineResult::partial_failure() const {
  return std::any_of(tiles.begin(), tiles.end(), [](const TileReport &t) { return t.error; });
}

namespace {

struct TileState {
  RasterGrid composite;
  std::vector<DetectionRegion> components;
  bool ok = false;
};

/// Pixel offset of each tile in a shared mosaic, or nothing when some tile is
/// off the common grid (different pixel size, or a fractional offset).
struct Mosaic {
  geo::GeoTransform transform;
  std::vector<std::int64_t> col_off, row_off;
  std::int64_t width = 0;
};

std::optional<Mosaic> mosaic_of(const std::vector<TileState> &state) {
  const TileState *ref = nullptr;
  for (const auto &s : state)
    if (s.ok) {
      ref = &s;
      break;
    }
  if (!ref) return std::nullopt;
  const auto &rt = ref->composite.transform;
  Mosaic m;
  m.col_off.assign(state.size(), 0);
  m.row_off.assign(state.size(), 0);
  std::int64_t min_c = 0, min_r = 0, max_c = 0;
  bool first = true;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!state[i].ok) continue;
    const auto &t = state[i].composite.transform;
    if (t.pixel_width != rt.pixel_width || t.pixel_height != rt.pixel_height) return std::nullopt;
    const double dc = (t.origin_lon - rt.origin_lon) / rt.pixel_width;
    const double dr = (t.origin_lat - rt.origin_lat) / rt.pixel_height;
    if (std::abs(dc - std::round(dc)) > 1e-6 || std::abs(dr - std::round(dr)) > 1e-6) return std::nullopt;
    m.col_off[i] = std::llround(dc);
    m.row_off[i] = std::llround(dr);
    const auto right = m.col_off[i] + static_cast<std::int64_t>(state[i].composite.width);
    min_c = first ? m.col_off[i] : std::min(min_c, m.col_off[i]);
    min_r = first ? m.row_off[i] : std::min(min_r, m.row_off[i]);
    max_c = first ? right : std::max(max_c, right);
    first = false;
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    m.col_off[i] -= min_c;
    m.row_off[i] -= min_r;
  }
  m.width = max_c - min_c;
  m.transform = rt;
  m.transform.origin_lon += static_cast<double>(min_c) * rt.pixel_width;
  m.transform.origin_lat += static_cast<double>(min_r) * rt.pixel_height;
  return m;
}

std::size_t find_root(std::vector<std::size_t> &parent, std::size_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

/// Groups pieces that are 8-adjacent across a tile seam. Only pixels on a
/// tile border can touch another tile, so only those are indexed.
std::vector<std::size_t> seam_groups(const std::vector<TileState> &state, const Mosaic &m,
                                     const std::vector<std::pair<std::size_t, std::size_t>> &pieces) {
  std::vector<std::size_t> parent(pieces.size());
  std::iota(parent.begin(), parent.end(), 0);
  const auto stride = static_cast<std::uint64_t>(m.width) + 2;
  auto key = [&](std::int64_t col, std::int64_t row) {
    return static_cast<std::uint64_t>(row + 1) * stride + static_cast<std::uint64_t>(col + 1);
  };
  std::unordered_map<std::uint64_t, std::size_t> owner;
  std::vector<std::vector<geo::PixelIndex>> border(pieces.size());
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    const auto [t, r] = pieces[p];
    const auto w = static_cast<std::int64_t>(state[t].composite.width);
    const auto h = static_cast<std::int64_t>(state[t].composite.height);
    for (const auto &px : state[t].components[r].pixels) {
      if (px.col != 0 && px.row != 0 && px.col != w - 1 && px.row != h - 1) continue;
      const geo::PixelIndex g{px.col + m.col_off[t], px.row + m.row_off[t]};
      border[p].push_back(g);
      owner.emplace(key(g.col, g.row), p);
    }
  }
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    for (const auto &g : border[p]) {
      for (std::int64_t dr = -1; dr <= 1; ++dr)
        for (std::int64_t dc = -1; dc <= 1; ++dc) {
          if (g.col + dc < 0 || g.row + dr < 0) continue;
          const auto it = owner.find(key(g.col + dc, g.row + dr));
          if (it == owner.end() || pieces[it->second].first == pieces[p].first) continue;
          const auto a = find_root(parent, p), b = find_root(parent, it->second);
          if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }
  }
  std::vector<std::size_t> group(pieces.size());
  for (std::size_t p = 0; p < pieces.size(); ++p) group[p] = find_root(parent, p);
  return group;
}

RasterGrid composite_of(const TileFrames &tile, const DetectConfig &cfg) {
  if (tile.frames.empty()) throw Error(ErrorCode::EmptyStack, "tile has no frames");
  std::vector<RasterGrid> indices;
  indices.reserve(tile.frames.size());
  for (const auto &frame : tile.frames) indices.push_back(ndbki(frame));
  return percentile_composite(indices, cfg.percentile);
}

std::vector<DetectionRegion> components_in_tile(const RasterGrid &composite, double threshold,
                                                const DetectConfig &cfg) {
  const BinaryMask seeds = candidate_seeds(composite, threshold, cfg.window);
  const BinaryMask footprints = grow_footprints(seeds, composite, threshold);
  const BinaryMask closed = morphological_closing(footprints, cfg.se_radius);
  return connected_components(closed);
}

template <typename Fn> void capture_errors(TileReport &report, Fn &&fn) {
  try {
    fn();
  } catch (const std::exception &e) {
    report.error = e.what();
  }
}

} // namespace

PipelineResult run_pipeline(const std::vector<TileFrames> &tiles, const RasterGrid *heights,
                            const DetectConfig &cfg) {
  const auto n = static_cast<std::int64_t>(tiles.size());
  const int workers = cfg.jobs > 0 ? cfg.jobs : omp_get_max_threads();
  std::vector<TileState> state(tiles.size());
  PipelineResult result;
  result.tiles.resize(tiles.size());

#pragma omp parallel for schedule(dynamic) num_threads(workers) if (n > 1)
  for (std::int64_t t = 0; t < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    auto &report = result.tiles[i];
    report.name = tiles[i].name;
    if (tiles[i].load_error) {
      report.error = *tiles[i].load_error;
      continue;
    }
    capture_errors(report, [&] {
      state[i].composite = composite_of(tiles[i], cfg);
      state[i].ok = true;
    });
  }

  std::optional<double> scene_threshold;
  std::optional<std::string> scene_error;
  if (cfg.threshold_scope == ThresholdScope::Scene) {
    std::vector<const RasterGrid *> pooled;
    for (const auto &s : state) {
      if (s.ok) pooled.push_back(&s.composite);
    }
    if (!pooled.empty()) {
      try {
        scene_threshold = std::max(otsu_threshold(pooled, cfg.bins), cfg.min_threshold);
      } catch (const std::exception &e) {
        scene_error = e.what();
      }
    }
  }

#pragma omp parallel for schedule(dynamic) num_threads(workers) if (n > 1)
  for (std::int64_t t = 0; t < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    auto &report = result.tiles[i];
    if (!state[i].ok) continue;
    if (scene_error) {
      report.error = *scene_error;
      continue;
    }
    capture_errors(report, [&] {
      const double threshold =
          scene_threshold ? *scene_threshold
                          : std::max(otsu_threshold(state[i].composite, cfg.bins),
                                     cfg.min_threshold);
      report.threshold = threshold;
      state[i].components = components_in_tile(state[i].composite, threshold, cfg);
    });
    if (report.error) {
      state[i].components.clear();
      state[i].ok = false;
    }
  }

  // Pieces in tile then component order; seam merging and filtering are serial
  // so the output does not depend on the worker count.
  std::vector<std::pair<std::size_t, std::size_t>> pieces;
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    if (!state[i].ok) continue;
    ++result.tiles_processed;
    for (std::size_t r = 0; r < state[i].components.size(); ++r) pieces.emplace_back(i, r);
  }
  const auto mosaic = mosaic_of(state);
  std::vector<std::size_t> group(pieces.size());
  std::iota(group.begin(), group.end(), 0);
  if (mosaic) {
    result.transform = mosaic->transform;
    group = seam_groups(state, *mosaic, pieces);
  }

  for (std::size_t g = 0; g < pieces.size(); ++g) {
    if (group[g] != g) continue; // not the first piece of its group
    const auto [first_tile, first_index] = pieces[g];
    DetectionRegion region;
    region.label_id = state[first_tile].components[first_index].label_id;
    double sum = 0.0;
    std::size_t valid = 0;
    for (std::size_t p = g; p < pieces.size(); ++p) {
      if (group[p] != g) continue;
      const auto [t, r] = pieces[p];
      const auto &grid = state[t].composite;
      for (const auto &px : state[t].components[r].pixels) {
        const double v = grid.at(0, static_cast<std::size_t>(px.row), static_cast<std::size_t>(px.col));
        if (!grid.is_nodata(v)) {
          sum += v;
          ++valid;
        }
        region.pixels.push_back(mosaic ? geo::PixelIndex{px.col + mosaic->col_off[t], px.row + mosaic->row_off[t]}
                                       : px);
      }
    }
    std::sort(region.pixels.begin(), region.pixels.end(),
              [](const auto &a, const auto &b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    std::int64_t c0 = region.pixels[0].col, c1 = c0, r0 = region.pixels[0].row, r1 = r0;
    for (const auto &px : region.pixels) {
      c0 = std::min(c0, px.col);
      c1 = std::max(c1, px.col);
      r0 = std::min(r0, px.row);
      r1 = std::max(r1, px.row);
    }
    region.bbox = {double(c0), double(r0), double(c1 + 1), double(r1 + 1)};
    region.score = valid == 0 ? 0.0 : sum / static_cast<double>(valid);

    auto &report = result.tiles[first_tile];
    ++report.regions_found;
    const auto &frame = mosaic ? mosaic->transform : state[first_tile].composite.transform;
    if (heights && !height_filter(region, frame, *heights, cfg.height).keep) {
      ++report.regions_rejected;
      ++result.regions_rejected_by_height;
      continue;
    }
    region.polygon = vectorize(region, frame);
    result.regions.push_back(std::move(region));
  }
  return result;
}

} // namespace kiln::rs
