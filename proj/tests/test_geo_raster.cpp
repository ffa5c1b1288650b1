#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "kiln/error.hpp"
#include "kiln/geo.hpp"
#include "kiln/raster.hpp"
#include "kiln/rng.hpp"
#include "test_util.hpp"

using namespace kiln;
using geo::GeoPoint;

TEST_CASE("haversine quarter circles") {
  const double quarter = std::numbers::pi / 2.0 * geo::kEarthRadiusM;
  CHECK(geo::haversine_distance({74.0, 31.0}, {74.0, 31.0}) == 0.0);
  CHECK(geo::haversine_distance({0, 0}, {90, 0}) == doctest::Approx(quarter).epsilon(1e-12));
  CHECK(geo::haversine_distance({0, 0}, {0, 90}) == doctest::Approx(quarter).epsilon(1e-12));
  CHECK(quarter == doctest::Approx(10'007'543.4).epsilon(1e-8));
}

TEST_CASE("haversine is symmetric") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const GeoPoint a{rng.uniform(-180, 180), rng.uniform(-89, 89)};
    const GeoPoint b{rng.uniform(-180, 180), rng.uniform(-89, 89)};
    CHECK(geo::haversine_distance(a, b) == doctest::Approx(geo::haversine_distance(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("bearing") {
  CHECK(geo::bearing({74.0, 31.0}, {74.1, 31.0}) == 0.0);
  CHECK(geo::bearing({74.0, 31.0}, {74.0, 31.1}) == doctest::Approx(std::numbers::pi / 2));
  CHECK(geo::bearing({74.0, 31.0}, {73.9, 31.0}) == doctest::Approx(std::numbers::pi));
  const double expected = std::atan2(0.1, 0.1 * std::cos(31.05 * std::numbers::pi / 180.0));
  CHECK(geo::bearing({74.0, 31.0}, {74.1, 31.1}) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.8623).epsilon(1e-4));
  CHECK_THROWS_AS(geo::bearing({74.0, 31.0}, {74.0, 31.0}), Error);
}

TEST_CASE("make_point normalizes") {
  const auto p = geo::make_point(190.0, 95.0);
  CHECK(p.lon == doctest::Approx(-170.0));
  CHECK(p.lat == 90.0);
  CHECK(geo::make_point(-180.0, 0.0).lon == -180.0);
  CHECK(geo::make_point(180.0, 0.0).lon == -180.0);
}

TEST_CASE("pixel/geo transforms") {
  const geo::GeoTransform gt{74.0, 31.5, 0.001, -0.001};
  const auto o = geo::pixel_to_geo(gt, 0, 0);
  CHECK(o.lon == 74.0);
  CHECK(o.lat == 31.5);
  const auto p = geo::pixel_to_geo(gt, 10, 20);
  CHECK(p.lon == doctest::Approx(74.010).epsilon(1e-14));
  CHECK(p.lat == doctest::Approx(31.480).epsilon(1e-14));
  const auto corner = geo::pixel_corner_to_geo(gt, 0, 0);
  CHECK(corner.lon == doctest::Approx(73.9995));
  CHECK(corner.lat == doctest::Approx(31.5005));

  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto col = static_cast<std::int64_t>(rng.below(5000));
    const auto row = static_cast<std::int64_t>(rng.below(5000));
    const auto back = geo::geo_to_pixel(gt, geo::pixel_to_geo(gt, double(col), double(row)));
    CHECK(back == geo::PixelIndex{col, row});
  }
}

TEST_CASE("KGRD round trip is bitwise") {
  test::TempDir dir;
  raster::RasterGrid g(3, 3, 1, 0.0, -9999.0, {74.0, 31.5, 1e-4, -1e-4});
  for (std::size_t i = 0; i < 9; ++i) g.data[i] = std::sqrt(double(i)) - 1.0 / 3.0;
  g.data[4] = -9999.0;
  raster::write_grid(g, dir / "a.kgrd");
  CHECK(raster::read_grid(dir / "a.kgrd") == g);
  CHECK(raster::encode_grid(g).size() == raster::kKgrdHeaderBytes + 9 * 8);
  CHECK(raster::encode_grid(g, raster::SampleType::F32).size() == raster::kKgrdHeaderBytes + 9 * 4);

  raster::RasterGrid f(4, 2, 2, 0.25);
  f.data[3] = 0.5;
  CHECK(raster::decode_grid(raster::encode_grid(f, raster::SampleType::F32)) == f);
}

TEST_CASE("KGRD header fields") {
  raster::RasterGrid g(5, 7, 2, 1.0, std::nullopt, {1.5, 2.5, 0.25, -0.5});
  const auto bytes = raster::encode_grid(g);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "KGRD");
  CHECK(bytes[4] == 1);
  CHECK(bytes[6] == 5);
  CHECK(bytes[10] == 7);
  CHECK(bytes[14] == 2);
  CHECK(bytes[16] == 2); // F64
  CHECK(bytes[17] == 0); // no nodata
}

TEST_CASE("KGRD errors") {
  raster::RasterGrid g(2, 2, 1, 1.0);
  auto bytes = raster::encode_grid(g);
  const auto code_of = [](std::vector<std::uint8_t> b) {
    try {
      raster::decode_grid(b);
    } catch (const Error &e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code_of({bytes.begin(), bytes.begin() + 20}) == ErrorCode::TruncatedFile);
  CHECK(code_of({bytes.begin(), bytes.end() - 1}) == ErrorCode::TruncatedFile);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK(code_of(bad) == ErrorCode::BadMagic);
  auto ver = bytes;
  ver[4] = 9;
  CHECK(code_of(ver) == ErrorCode::UnsupportedVersion);
  CHECK_THROWS_AS(raster::read_grid("/nonexistent/x.kgrd"), Error);
}

TEST_CASE("PNG tiles") {
  test::TempDir dir;
  const geo::GeoTransform gt{74.0, 31.5, 1e-4, -1e-4};
  raster::RasterGrid red(256, 256, 3, 0.0, std::nullopt, gt);
  for (auto &v : red.band(0)) v = 255.0;
  raster::write_rgb_tile(red, dir / "red.png", dir / "red.json");
  const auto back = raster::read_rgb_tile(dir / "red.png", dir / "red.json");
  CHECK(back.data == red.data);
  CHECK(back.transform == gt);

  raster::RasterGrid black(256, 256, 3, 0.0, std::nullopt, gt);
  raster::write_rgb_tile(black, dir / "black.png", dir / "black.json");
  CHECK(raster::read_rgb_tile(dir / "black.png", dir / "black.json").data == black.data);

  raster::RasterGrid small(16, 16, 3, 7.0, std::nullopt, gt);
  raster::write_rgb_tile(small, dir / "small.png", dir / "small.json");
  CHECK_THROWS_AS(raster::read_rgb_tile(dir / "small.png", dir / "small.json"), Error);
  CHECK(raster::read_rgb_tile(dir / "small.png", dir / "small.json", {false, 0}).data == small.data);
  try {
    raster::read_rgb_tile(dir / "red.png", dir / "missing.json");
    FAIL("expected MissingSidecar");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::MissingSidecar);
  }
}
