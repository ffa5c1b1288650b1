#include "kiln/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kiln/error.hpp"

namespace kiln::geo {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

GeoPoint make_point(double lon, double lat) {
  double l = std::fmod(lon + 180.0, 360.0);
  if (l < 0.0) l += 360.0;
  return {l - 180.0, std::clamp(lat, -90.0, 90.0)};
}

bool GeoTransform::valid() const {
  return std::isfinite(origin_lon) && std::isfinite(origin_lat) && std::isfinite(pixel_width) &&
         std::isfinite(pixel_height) && pixel_width > 0.0 && pixel_height != 0.0;
}

double haversine_distance(const GeoPoint &a, const GeoPoint &b) {
  const double lat1 = a.lat * kDegToRad;
  const double lat2 = b.lat * kDegToRad;
  const double s_lat = std::sin((lat2 - lat1) / 2.0);
  const double s_lon = std::sin((b.lon - a.lon) * kDegToRad / 2.0);
  // The two terms are symmetric under swapping a and b, so the result is too.
  const double h = s_lat * s_lat + std::cos(lat1) * std::cos(lat2) * s_lon * s_lon;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double bearing(const GeoPoint &a, const GeoPoint &b) {
  const double mean_lat = 0.5 * (a.lat + b.lat) * kDegToRad;
  const double dx = (b.lon - a.lon) * std::cos(mean_lat) * kDegToRad;
  const double dy = (b.lat - a.lat) * kDegToRad;
  if (dx == 0.0 && dy == 0.0) {
    throw Error(ErrorCode::DegenerateEdge, "bearing between coincident points");
  }
  double theta = std::atan2(dy, dx);
  if (theta == -std::numbers::pi) theta = std::numbers::pi;
  return theta;
}

GeoPoint pixel_to_geo(const GeoTransform &gt, double col, double row) {
  return {gt.origin_lon + col * gt.pixel_width, gt.origin_lat + row * gt.pixel_height};
}

GeoPoint pixel_corner_to_geo(const GeoTransform &gt, double x, double y) {
  return pixel_to_geo(gt, x - 0.5, y - 0.5);
}

PixelIndex geo_to_pixel(const GeoTransform &gt, const GeoPoint &p) {
  // Each pixel owns the half-open cell [c - 0.5, c + 0.5) around its center.
  const double x = (p.lon - gt.origin_lon) / gt.pixel_width;
  const double y = (p.lat - gt.origin_lat) / gt.pixel_height;
  return {static_cast<std::int64_t>(std::floor(x + 0.5)),
          static_cast<std::int64_t>(std::floor(y + 0.5))};
}

} // namespace kiln::geo
