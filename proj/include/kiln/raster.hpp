#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "kiln/geo.hpp"

namespace kiln::raster {

/// Multi-band float64 grid. Samples are band-sequential, each band row-major:
/// index = (band * height + row) * width + col.
struct RasterGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t bands = 0;
  std::vector<double> data;
  std::optional<double> nodata;
  geo::GeoTransform transform;

  RasterGrid() = default;
  RasterGrid(std::size_t width, std::size_t height, std::size_t bands, double fill = 0.0,
             std::optional<double> nodata = std::nullopt, geo::GeoTransform transform = {});

  std::size_t pixels() const { return width * height; }

  double &at(std::size_t band, std::size_t row, std::size_t col) {
    return data[(band * height + row) * width + col];
  }
  double at(std::size_t band, std::size_t row, std::size_t col) const {
    return data[(band * height + row) * width + col];
  }

  std::span<double> band(std::size_t b) { return {data.data() + b * pixels(), pixels()}; }
  std::span<const double> band(std::size_t b) const {
    return {data.data() + b * pixels(), pixels()};
  }

  /// Exact sentinel equality; a grid without a sentinel has no NoData.
  bool is_nodata(double v) const { return nodata.has_value() && v == *nodata; }

  /// Throws InvalidArgument when the shape invariants do not hold.
  void validate() const;

  friend bool operator==(const RasterGrid &, const RasterGrid &) = default;
};

struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(std::size_t width, std::size_t height, bool fill = false)
      : width(width), height(height), bits(width * height, fill ? 1 : 0) {}

  bool get(std::size_t row, std::size_t col) const { return bits[row * width + col] != 0; }
  void set(std::size_t row, std::size_t col, bool v = true) {
    bits[row * width + col] = v ? 1 : 0;
  }
  std::size_t count() const;
  bool subset_of(const BinaryMask &other) const;

  friend bool operator==(const BinaryMask &, const BinaryMask &) = default;
};

enum class SampleType : std::uint8_t { F32 = 1, F64 = 2 };

// KGRD: "KGRD", u16 version = 1, u32 width, u32 height, u16 bands, u8 dtype,
// u8 nodata flag, f64 nodata, six f64 geotransform terms in GDAL order
// (origin_lon, pixel_width, 0, origin_lat, 0, pixel_height), then
// band-sequential samples. All little-endian.
inline constexpr std::size_t kKgrdHeaderBytes = 74;

RasterGrid read_grid(const std::filesystem::path &path);
void write_grid(const RasterGrid &grid, const std::filesystem::path &path,
                SampleType type = SampleType::F64);

RasterGrid decode_grid(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_grid(const RasterGrid &grid, SampleType type = SampleType::F64);

struct TileOptions {
  /// Reject tiles whose size differs from expected_size x expected_size.
  bool enforce_size = true;
  std::size_t expected_size = 256;
};

/// 8-bit RGB PNG plus a JSON sidecar {origin_lon, origin_lat, pixel_width,
/// pixel_height} -> 3-band grid of values in [0, 255].
RasterGrid read_rgb_tile(const std::filesystem::path &png_path,
                         const std::filesystem::path &sidecar_path, const TileOptions &opts = {});

/// Writes bands 0..2 (clamped to [0, 255] and rounded) as an 8-bit RGB PNG and
/// the georeferencing sidecar next to it.
void write_rgb_tile(const RasterGrid &grid, const std::filesystem::path &png_path,
                    const std::filesystem::path &sidecar_path);

} // namespace kiln::raster
