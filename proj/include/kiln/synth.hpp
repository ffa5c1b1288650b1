#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kiln/bbox.hpp"
#include "kiln/geo.hpp"
#include "kiln/graph.hpp"
#include "kiln/raster.hpp"
#include "kiln/rs/regions.hpp"

namespace kiln::synth {

using Rgb = std::array<double, 3>;

struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t width = 512;
  std::size_t height = 512;
  std::size_t frames = 5;
  std::size_t kiln_count = 12;
  std::size_t kiln_radius_px = 6;
  Rgb background_rgb{60.0, 120.0, 50.0};
  Rgb kiln_rgb{190.0, 70.0, 60.0};
  /// A kiln in a frame where it is not firing: ash grey, slightly green.
  Rgb inactive_rgb{100.0, 110.0, 100.0};
  double activity_probability = 0.6;
  /// Per-channel Gaussian noise added to every pixel of every frame.
  double noise_sigma = 4.0;
  std::size_t distractor_count = 3;
  Rgb roof_rgb{185.0, 65.0, 55.0};
  geo::GeoTransform transform{74.0, 31.5, 1e-4, -1e-4};

  /// Throws InvalidArgument for impossible values.
  void validate() const;
};

struct PlantedKiln {
  std::size_t center_col = 0;
  std::size_t center_row = 0;
  std::size_t radius = 0;
  /// Pixel-edge box of the disk.
  BBox bbox;
  /// Frames in which the kiln is firing.
  std::vector<bool> active;
  rs::DetectionRegion region;

  std::size_t active_frames() const;
};

struct PlantedRoof {
  BBox bbox;
  double height_m = 0.0;
};

struct Scene {
  SceneSpec spec;
  std::vector<raster::RasterGrid> frames; ///< 3-band RGB, one per frame
  raster::RasterGrid heights;             ///< 1 band, metres
  std::vector<PlantedKiln> kilns;
  std::vector<PlantedRoof> roofs;
};

/// Red disks on a noisy green field, each firing per frame with
/// activity_probability, plus red roofs standing > 3 m in the height grid.
/// Objects keep a gap of at least 2 * kiln radius. PlacementFailure when they
/// cannot all fit.
Scene gen_raster_scene(const SceneSpec &spec);

enum class TileFormat { Kgrd, Png };

/// Writes `frame_XXX/tile_YYY.{kgrd|png+json}`, `heights.kgrd` and
/// `ground_truth.geojson` under `dir`. tile_size 0 keeps one tile per frame.
void write_scene(const Scene &scene, const std::filesystem::path &dir,
                 TileFormat format = TileFormat::Kgrd, std::size_t tile_size = 0);

/// Ground-truth regions in kiln order, polygons in lon/lat.
std::vector<rs::DetectionRegion> ground_truth_regions(const Scene &scene);

enum class GraphLayout {
  /// Short straight runs of nodes, each aligned near the axis or near its
  /// perpendicular.
  Segments,
  /// Independent uniform positions in the window.
  Uniform,
};

struct GraphSpec {
  std::uint64_t seed = 0;
  std::size_t node_count = 1000;
  std::size_t k = 8;
  double anisotropy_axis_deg = 0.0;
  GraphLayout layout = GraphLayout::Segments;
  std::size_t noise_features = 1;
  double origin_lon = 74.0;
  double origin_lat = 31.0;
  double extent_deg = 0.5;
  std::size_t segment_nodes = 9;
  double segment_spacing_deg = 0.001;
  double segment_spread_deg = 25.0;
  double segment_min_separation_deg = 0.03;
  double jitter_deg = 5e-5;

  void validate() const;
};

/// True when the undirected line through `bearing` lies within 45 degrees of
/// the axis (boundary included).
bool within_axis(double bearing_rad, double axis_deg);

/// Label 1 iff more than half of each node's out-edges lie within the axis.
void assign_anisotropic_labels(graph::SpatialGraph &g, double axis_deg);

/// Noise features plus a trailing constant 1; labels from edge directions only.
graph::SpatialGraph gen_anisotropic_graph(const GraphSpec &spec);

struct SeparableSpec {
  std::uint64_t seed = 0;
  std::size_t node_count = 1000;
  std::size_t k = 8;
  std::size_t features = 4;
  double sigma = 0.5;
  double origin_lon = 74.0;
  double origin_lat = 31.0;
  double extent_deg = 0.5;

  void validate() const;
};

/// Labels drawn first (fair coin), then features ~ N(+1 or -1, sigma) per class.
graph::SpatialGraph gen_feature_separable_graph(const SeparableSpec &spec);

} // namespace kiln::synth
