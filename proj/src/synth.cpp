#include "kiln/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>

#include "kiln/error.hpp"
#include "kiln/geojson.hpp"
#include "kiln/rng.hpp"

namespace kiln::synth {

namespace {

[[noreturn]] void invalid(const std::string &msg) { throw Error(ErrorCode::InvalidArgument, msg); }

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

double clamp_byte(double v) { return std::clamp(std::round(v), 0.0, 255.0); }

struct Footprint {
  double cx, cy, reach;
};

} // namespace

void SceneSpec::validate() const {
  if (width == 0 || height == 0) invalid("scene size must be positive");
  if (frames == 0) invalid("frames must be >= 1");
  if (kiln_radius_px == 0) invalid("kiln_radius_px must be >= 1");
  if (!(activity_probability > 0.0 && activity_probability <= 1.0)) {
    invalid("activity_probability must lie in (0, 1]");
  }
  if (!(noise_sigma >= 0.0)) invalid("noise_sigma must be >= 0");
  if (!transform.valid()) invalid("scene transform is invalid");
}

std::size_t PlantedKiln::active_frames() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

Scene gen_raster_scene(const SceneSpec &spec) {
  spec.validate();
  Rng rng(spec.seed);
  Scene scene;
  scene.spec = spec;
  const auto W = static_cast<double>(spec.width), H = static_cast<double>(spec.height);
  const double r = static_cast<double>(spec.kiln_radius_px);
  const double gap = 2.0 * r;

  std::vector<Footprint> placed;
  auto try_place = [&](double reach) -> std::optional<Footprint> {
    const double lo = reach + 1.0;
    if (W - 1.0 - lo < lo || H - 1.0 - lo < lo) return std::nullopt;
    for (int attempt = 0; attempt < 20000; ++attempt) {
      const Footprint f{std::floor(rng.uniform(lo, W - 1.0 - lo)),
                        std::floor(rng.uniform(lo, H - 1.0 - lo)), reach};
      const bool clear = std::all_of(placed.begin(), placed.end(), [&](const Footprint &o) {
        return std::hypot(f.cx - o.cx, f.cy - o.cy) >= f.reach + o.reach + gap;
      });
      if (clear) return f;
    }
    return std::nullopt;
  };

  for (std::size_t i = 0; i < spec.kiln_count; ++i) {
    const auto f = try_place(r);
    if (!f) throw Error(ErrorCode::PlacementFailure, "cannot fit kiln " + std::to_string(i + 1));
    placed.push_back(*f);
    PlantedKiln k;
    k.center_col = static_cast<std::size_t>(f->cx);
    k.center_row = static_cast<std::size_t>(f->cy);
    k.radius = spec.kiln_radius_px;
    scene.kilns.push_back(std::move(k));
  }
  for (std::size_t i = 0; i < spec.distractor_count; ++i) {
    const auto w = static_cast<std::size_t>(8 + rng.below(7));
    const auto h = static_cast<std::size_t>(8 + rng.below(7));
    const auto f = try_place(std::hypot(static_cast<double>(w), static_cast<double>(h)) / 2.0);
    if (!f) throw Error(ErrorCode::PlacementFailure, "cannot fit roof " + std::to_string(i + 1));
    placed.push_back(*f);
    const double x0 = f->cx - static_cast<double>(w / 2), y0 = f->cy - static_cast<double>(h / 2);
    scene.roofs.push_back({{x0, y0, x0 + static_cast<double>(w), y0 + static_cast<double>(h)},
                           rng.uniform(6.0, 12.0)});
  }

  // Owner map: 0 background, 1..K kilns, K+1.. roofs.
  std::vector<std::uint32_t> owner(spec.width * spec.height, 0);
  for (std::size_t i = 0; i < scene.kilns.size(); ++i) {
    auto &k = scene.kilns[i];
    const auto rr = static_cast<std::int64_t>(k.radius);
    const auto cx = static_cast<std::int64_t>(k.center_col), cy = static_cast<std::int64_t>(k.center_row);
    for (std::int64_t y = cy - rr; y <= cy + rr; ++y) {
      for (std::int64_t x = cx - rr; x <= cx + rr; ++x) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > rr * rr) continue;
        owner[static_cast<std::size_t>(y) * spec.width + static_cast<std::size_t>(x)] =
            static_cast<std::uint32_t>(i + 1);
        k.region.pixels.push_back({x, y});
      }
    }
    k.region.label_id = static_cast<int>(i + 1);
    k.region.score = 1.0;
    k.bbox = {static_cast<double>(cx - rr), static_cast<double>(cy - rr),
              static_cast<double>(cx + rr + 1), static_cast<double>(cy + rr + 1)};
    k.region.bbox = k.bbox;
    k.region.polygon = rs::vectorize(k.region, spec.transform);
  }
  scene.heights = raster::RasterGrid(spec.width, spec.height, 1, 0.0, std::nullopt, spec.transform);
  for (std::size_t i = 0; i < scene.roofs.size(); ++i) {
    const auto &roof = scene.roofs[i];
    for (auto y = static_cast<std::size_t>(roof.bbox.y0); y < static_cast<std::size_t>(roof.bbox.y1); ++y) {
      for (auto x = static_cast<std::size_t>(roof.bbox.x0); x < static_cast<std::size_t>(roof.bbox.x1); ++x) {
        owner[y * spec.width + x] = static_cast<std::uint32_t>(scene.kilns.size() + i + 1);
        scene.heights.at(0, y, x) = roof.height_m;
      }
    }
  }

  for (auto &k : scene.kilns) {
    for (std::size_t f = 0; f < spec.frames; ++f) k.active.push_back(rng.uniform() < spec.activity_probability);
  }

  for (std::size_t f = 0; f < spec.frames; ++f) {
    raster::RasterGrid frame(spec.width, spec.height, 3, 0.0, std::nullopt, spec.transform);
    for (std::size_t y = 0; y < spec.height; ++y) {
      for (std::size_t x = 0; x < spec.width; ++x) {
        const auto o = owner[y * spec.width + x];
        const Rgb *base = &spec.background_rgb;
        if (o > scene.kilns.size()) {
          base = &spec.roof_rgb;
        } else if (o > 0) {
          base = scene.kilns[o - 1].active[f] ? &spec.kiln_rgb : &spec.inactive_rgb;
        }
        for (std::size_t b = 0; b < 3; ++b) {
          frame.at(b, y, x) = clamp_byte((*base)[b] + spec.noise_sigma * rng.normal());
        }
      }
    }
    scene.frames.push_back(std::move(frame));
  }
  return scene;
}

std::vector<rs::DetectionRegion> ground_truth_regions(const Scene &scene) {
  std::vector<rs::DetectionRegion> out;
  for (const auto &k : scene.kilns) out.push_back(k.region);
  return out;
}

namespace {

raster::RasterGrid crop(const raster::RasterGrid &g, std::size_t x0, std::size_t y0, std::size_t w,
                        std::size_t h) {
  geo::GeoTransform t = g.transform;
  t.origin_lon += static_cast<double>(x0) * t.pixel_width;
  t.origin_lat += static_cast<double>(y0) * t.pixel_height;
  raster::RasterGrid out(w, h, g.bands, 0.0, g.nodata, t);
  for (std::size_t b = 0; b < g.bands; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(b, y, x) = g.at(b, y0 + y, x0 + x);
  return out;
}

std::string numbered(const char *prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03zu", prefix, i);
  return buf;
}

} // namespace

void write_scene(const Scene &scene, const std::filesystem::path &dir, TileFormat format,
                 std::size_t tile_size) {
  std::filesystem::create_directories(dir);
  const auto &spec = scene.spec;
  const std::size_t ts_x = tile_size == 0 ? spec.width : tile_size;
  const std::size_t ts_y = tile_size == 0 ? spec.height : tile_size;
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const auto frame_dir = dir / numbered("frame", f);
    std::filesystem::create_directories(frame_dir);
    std::size_t tile = 0;
    for (std::size_t y0 = 0; y0 < spec.height; y0 += ts_y) {
      for (std::size_t x0 = 0; x0 < spec.width; x0 += ts_x, ++tile) {
        const auto grid = crop(scene.frames[f], x0, y0, std::min(ts_x, spec.width - x0),
                               std::min(ts_y, spec.height - y0));
        const auto stem = frame_dir / numbered("tile", tile);
        if (format == TileFormat::Kgrd) {
          raster::write_grid(grid, stem.string() + ".kgrd", raster::SampleType::F32);
        } else {
          raster::write_rgb_tile(grid, stem.string() + ".png", stem.string() + ".json");
        }
      }
    }
  }
  raster::write_grid(scene.heights, dir / "heights.kgrd", raster::SampleType::F32);
  geojson::write_geojson(ground_truth_regions(scene), dir / "ground_truth.geojson");
}

void GraphSpec::validate() const {
  if (node_count < 20) invalid("node_count must be >= 20");
  if (k < 1) invalid("k must be >= 1");
  if (!(extent_deg > 0.0)) invalid("extent_deg must be > 0");
  if (layout == GraphLayout::Segments && (segment_nodes < 2 || !(segment_spacing_deg > 0.0))) {
    invalid("segments need >= 2 nodes and a positive spacing");
  }
}

bool within_axis(double bearing_rad, double axis_deg) {
  // Fold the offset onto [-pi/2, pi/2]: an axis is a line, not a direction.
  const double d = std::remainder(bearing_rad - deg2rad(axis_deg), std::numbers::pi);
  return std::abs(d) <= std::numbers::pi / 4.0 + 1e-12;
}

void assign_anisotropic_labels(graph::SpatialGraph &g, double axis_deg) {
  std::vector<std::size_t> inside(g.nodes.size(), 0), degree(g.nodes.size(), 0);
  for (const auto &e : g.edges) {
    ++degree[e.src];
    if (within_axis(e.bearing_rad, axis_deg)) ++inside[e.src];
  }
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    g.nodes[i].label = 2 * inside[i] > degree[i] ? 1 : 0;
  }
}

namespace {

std::vector<geo::GeoPoint> segment_positions(const GraphSpec &spec, Rng &rng) {
  const std::size_t per = spec.segment_nodes;
  const std::size_t segments = (spec.node_count + per - 1) / per;
  const double margin = 0.5 * static_cast<double>(per - 1) * spec.segment_spacing_deg +
                        spec.segment_min_separation_deg / 2.0;
  const double lo = margin, hi = spec.extent_deg - margin;
  if (hi <= lo) throw Error(ErrorCode::PlacementFailure, "window too small for one segment");
  std::vector<std::pair<double, double>> centers;
  for (int attempt = 0; centers.size() < segments; ++attempt) {
    if (attempt > 2000000) {
      throw Error(ErrorCode::PlacementFailure, "cannot separate " + std::to_string(segments) + " segments");
    }
    const double cx = spec.origin_lon + rng.uniform(lo, hi);
    const double cy = spec.origin_lat + rng.uniform(lo, hi);
    const bool clear = std::all_of(centers.begin(), centers.end(), [&](const auto &c) {
      return std::hypot(cx - c.first, cy - c.second) > spec.segment_min_separation_deg;
    });
    if (clear) centers.emplace_back(cx, cy);
  }
  std::vector<geo::GeoPoint> points;
  for (const auto &[cx, cy] : centers) {
    const double base = rng.uniform() < 0.5 ? 0.0 : 90.0;
    const double angle =
        deg2rad(spec.anisotropy_axis_deg + base + rng.uniform(-spec.segment_spread_deg, spec.segment_spread_deg));
    const double coslat = std::cos(deg2rad(cy));
    for (std::size_t t = 0; t < per && points.size() < spec.node_count; ++t) {
      const double s = (static_cast<double>(t) - 0.5 * static_cast<double>(per - 1)) * spec.segment_spacing_deg;
      const double lon = cx + s * std::cos(angle) / coslat + rng.normal(0.0, spec.jitter_deg);
      const double lat = cy + s * std::sin(angle) + rng.normal(0.0, spec.jitter_deg);
      points.push_back(geo::make_point(lon, lat));
    }
  }
  return points;
}

std::vector<geo::GeoPoint> uniform_positions(std::size_t n, double lon0, double lat0, double extent,
                                             Rng &rng) {
  std::vector<geo::GeoPoint> points;
  for (std::size_t i = 0; i < n; ++i) {
    const double lon = lon0 + rng.uniform(0.0, extent);
    const double lat = lat0 + rng.uniform(0.0, extent);
    points.push_back(geo::make_point(lon, lat));
  }
  return points;
}

} // namespace

graph::SpatialGraph gen_anisotropic_graph(const GraphSpec &spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto points = spec.layout == GraphLayout::Segments
                          ? segment_positions(spec, rng)
                          : uniform_positions(spec.node_count, spec.origin_lon, spec.origin_lat,
                                              spec.extent_deg, rng);
  std::vector<graph::PoiNode> nodes(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto &n = nodes[i];
    n.id = static_cast<std::int64_t>(i);
    n.location = points[i];
    for (std::size_t f = 0; f < spec.noise_features; ++f) n.features.push_back(rng.normal());
    n.features.push_back(1.0);
    n.missing.assign(n.features.size(), false);
  }
  auto g = graph::knn_edges(std::move(nodes), spec.k);
  for (std::size_t f = 0; f < spec.noise_features; ++f) g.feature_names.push_back("noise_" + std::to_string(f));
  g.feature_names.push_back("const");
  assign_anisotropic_labels(g, spec.anisotropy_axis_deg);
  return g;
}

void SeparableSpec::validate() const {
  if (node_count < 20) invalid("node_count must be >= 20");
  if (k < 1) invalid("k must be >= 1");
  if (features < 1) invalid("features must be >= 1");
  if (!(sigma >= 0.0)) invalid("sigma must be >= 0");
  if (!(extent_deg > 0.0)) invalid("extent_deg must be > 0");
}

graph::SpatialGraph gen_feature_separable_graph(const SeparableSpec &spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<int> labels(spec.node_count);
  for (auto &y : labels) y = rng.uniform() < 0.5 ? 1 : 0;
  const auto points = uniform_positions(spec.node_count, spec.origin_lon, spec.origin_lat,
                                        spec.extent_deg, rng);
  std::vector<graph::PoiNode> nodes(spec.node_count);
  for (std::size_t i = 0; i < spec.node_count; ++i) {
    auto &n = nodes[i];
    n.id = static_cast<std::int64_t>(i);
    n.location = points[i];
    n.label = labels[i];
    const double mean = labels[i] == 1 ? 1.0 : -1.0;
    for (std::size_t f = 0; f < spec.features; ++f) n.features.push_back(rng.normal(mean, spec.sigma));
    n.missing.assign(spec.features, false);
  }
  auto g = graph::knn_edges(std::move(nodes), spec.k);
  for (std::size_t f = 0; f < spec.features; ++f) g.feature_names.push_back("f_" + std::to_string(f));
  return g;
}

} // namespace kiln::synth
