#pragma once

#include <cstdint>

namespace kiln::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;

/// Longitude/latitude in degrees. Construct through `make_point` to get the
/// normalized form (lon in [-180, 180), lat clamped to [-90, 90]).
struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;
};

GeoPoint make_point(double lon, double lat);

/// North-up affine grid. The origin is the center of pixel (0, 0); the outer
/// corner of the grid sits half a pixel further out.
struct GeoTransform {
  double origin_lon = 0.0;
  double origin_lat = 0.0;
  double pixel_width = 1.0;
  double pixel_height = -1.0;

  bool valid() const;
  friend bool operator==(const GeoTransform &, const GeoTransform &) = default;
};

struct PixelIndex {
  std::int64_t col = 0;
  std::int64_t row = 0;
  friend bool operator==(const PixelIndex &, const PixelIndex &) = default;
};

/// Great-circle distance in meters on the mean-radius sphere.
double haversine_distance(const GeoPoint &a, const GeoPoint &b);

/// Planar bearing of b seen from a, in (-pi, pi]; 0 is east, pi/2 north.
/// Offsets are taken on a local equirectangular plane at the mean latitude.
/// Throws DegenerateEdge for coincident points.
double bearing(const GeoPoint &a, const GeoPoint &b);

/// Center of pixel (col, row).
GeoPoint pixel_to_geo(const GeoTransform &gt, double col, double row);

/// Pixel whose cell contains the point (nearest pixel center).
PixelIndex geo_to_pixel(const GeoTransform &gt, const GeoPoint &p);

/// Continuous pixel-edge coordinates: (0, 0) is the outer corner of pixel (0, 0).
GeoPoint pixel_corner_to_geo(const GeoTransform &gt, double x, double y);

} // namespace kiln::geo
