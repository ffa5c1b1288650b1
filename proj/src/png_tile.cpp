#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "json.hpp"
#include "kiln/error.hpp"
#include "kiln/raster.hpp"

namespace kiln::raster {

namespace {

geo::GeoTransform read_sidecar(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingSidecar, "no sidecar at " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::MissingSidecar, path.string() + ": " + e.what());
  }
  geo::GeoTransform gt;
  for (const char *key : {"origin_lon", "origin_lat", "pixel_width", "pixel_height"}) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw Error(ErrorCode::MissingSidecar, path.string() + " lacks numeric key " + key);
    }
  }
  gt.origin_lon = j["origin_lon"].get<double>();
  gt.origin_lat = j["origin_lat"].get<double>();
  gt.pixel_width = j["pixel_width"].get<double>();
  gt.pixel_height = j["pixel_height"].get<double>();
  if (!gt.valid()) throw Error(ErrorCode::InvalidArgument, "invalid transform in " + path.string());
  return gt;
}

} // namespace

RasterGrid read_rgb_tile(const std::filesystem::path &png_path,
                         const std::filesystem::path &sidecar_path, const TileOptions &opts) {
  if (!std::filesystem::exists(sidecar_path)) {
    throw Error(ErrorCode::MissingSidecar, "no sidecar at " + sidecar_path.string());
  }
  const auto transform = read_sidecar(sidecar_path);

  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, png_path.string().c_str())) {
    throw Error(ErrorCode::Io, png_path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::Io, png_path.string() + ": " + image.message);
  }
  const std::size_t w = image.width;
  const std::size_t h = image.height;
  if (opts.enforce_size && (w != opts.expected_size || h != opts.expected_size)) {
    throw Error(ErrorCode::DimensionMismatch,
                png_path.string() + " is " + std::to_string(w) + "x" + std::to_string(h) +
                    ", expected " + std::to_string(opts.expected_size) + "x" +
                    std::to_string(opts.expected_size));
  }

  RasterGrid grid(w, h, 3, 0.0, std::nullopt, transform);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t b = 0; b < 3; ++b) grid.at(b, r, c) = pixels[(r * w + c) * 3 + b];
    }
  }
  return grid;
}

void write_rgb_tile(const RasterGrid &grid, const std::filesystem::path &png_path,
                    const std::filesystem::path &sidecar_path) {
  if (grid.bands < 3) throw Error(ErrorCode::BandCountMismatch, "RGB tile needs 3 bands");
  std::vector<png_byte> pixels(grid.width * grid.height * 3);
  for (std::size_t r = 0; r < grid.height; ++r) {
    for (std::size_t c = 0; c < grid.width; ++c) {
      for (std::size_t b = 0; b < 3; ++b) {
        const double v = std::clamp(std::round(grid.at(b, r, c)), 0.0, 255.0);
        pixels[(r * grid.width + c) * 3 + b] = static_cast<png_byte>(v);
      }
    }
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(grid.width);
  image.height = static_cast<png_uint_32>(grid.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, png_path.string().c_str(), 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::Io, png_path.string() + ": " + image.message);
  }

  nlohmann::json side = {{"origin_lon", grid.transform.origin_lon},
                         {"origin_lat", grid.transform.origin_lat},
                         {"pixel_width", grid.transform.pixel_width},
                         {"pixel_height", grid.transform.pixel_height}};
  std::ofstream out(sidecar_path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + sidecar_path.string());
  out << side.dump(2) << '\n';
}

} // namespace kiln::raster
