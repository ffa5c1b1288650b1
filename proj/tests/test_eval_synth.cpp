#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "kiln/error.hpp"
#include "kiln/geojson.hpp"
#include "kiln/metrics.hpp"
#include "kiln/rng.hpp"
#include "kiln/synth.hpp"
#include "test_util.hpp"

using namespace kiln;

namespace {

/// Repeatedly takes the best remaining (IoU, pred, gt) triple.
std::vector<std::pair<std::size_t, std::size_t>> greedy_oracle(const std::vector<BBox> &p, const std::vector<BBox> &g,
                                                               double thr) {
  std::vector<bool> pu(p.size()), gu(g.size());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  while (true) {
    double best = -1.0;
    std::size_t bp = 0, bg = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (pu[i] || gu[j]) continue;
        const double ix = std::max(0.0, std::min(p[i].x1, g[j].x1) - std::max(p[i].x0, g[j].x0));
        const double iy = std::max(0.0, std::min(p[i].y1, g[j].y1) - std::max(p[i].y0, g[j].y0));
        const double inter = ix * iy;
        const double uni = p[i].area() + g[j].area() - inter;
        const double v = uni > 0 ? inter / uni : 0.0;
        if (v > best) {
          best = v;
          bp = i;
          bg = j;
        }
      }
    if (best < thr || best <= 0.0) break;
    pu[bp] = gu[bg] = true;
    out.emplace_back(bp, bg);
  }
  return out;
}

} // namespace

TEST_CASE("iou") {
  CHECK(eval::iou({0, 0, 10, 10}, {5, 0, 15, 10}) == 1.0 / 3.0);
  CHECK(eval::iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
  CHECK(eval::iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
  CHECK(eval::iou({0, 0, 1, 1}, {1, 0, 2, 1}) == 0.0);
  CHECK(eval::iou({1, 1, 1, 1}, {1, 1, 1, 1}) == 0.0);
}

TEST_CASE("detection f1") {
  auto r = eval::detection_f1(10, 0, 0);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
  r = eval::detection_f1(1, 1, 3);
  CHECK(r.precision == 0.5);
  CHECK(r.recall == 0.25);
  CHECK(r.f1 == 1.0 / 3.0);
  r = eval::detection_f1(0, 4, 2);
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.f1 == 0.0);
  CHECK(eval::detection_f1(0, 0, 0).f1 == 0.0);
}

TEST_CASE("matching hand cases") {
  const std::vector<BBox> boxes{{0, 0, 2, 2}, {5, 5, 8, 8}};
  auto m = eval::match_detections(boxes, boxes);
  CHECK(m.tp == 2);
  CHECK(m.fp == 0);
  CHECK(m.fn == 0);

  // One prediction straddling two truths: IoU 0.5 wins over 0.4.
  const std::vector<BBox> pred{{0, 0, 10, 10}};
  const std::vector<BBox> gts{{0, 0, 10, 4}, {0, 0, 10, 5}};
  REQUIRE(eval::iou(pred[0], gts[1]) == 0.5);
  REQUIRE(eval::iou(pred[0], gts[0]) == doctest::Approx(0.4));
  m = eval::match_detections(pred, gts);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].second == 1);
  CHECK(m.fn == 1);

  const std::vector<BBox> low{{0, 0, 100, 29}}, full{{0, 0, 100, 100}};
  m = eval::match_detections(low, full);
  CHECK(m.tp == 0);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  const std::vector<BBox> edge{{0, 0, 100, 30}};
  CHECK(eval::match_detections(edge, full).tp == 1);
}

TEST_CASE("matching agrees with the repeated-argmax oracle") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    auto box = [&] {
      const double x = double(rng.below(40)), y = double(rng.below(40));
      return BBox{x, y, x + 1 + double(rng.below(12)), y + 1 + double(rng.below(12))};
    };
    std::vector<BBox> p(rng.below(12)), g(rng.below(12));
    for (auto &b : p) b = box();
    for (auto &b : g) b = box();
    const auto m = eval::match_detections(p, g, 0.3);
    const auto expected = greedy_oracle(p, g, 0.3);
    CHECK(m.pairs == expected);
    CHECK(m.tp + m.fp == p.size());
    CHECK(m.tp + m.fn == g.size());
  }
}

TEST_CASE("node classification report") {
  const std::vector<int> truth{1, 1, 0, 0}, pred{1, 0, 0, 0};
  const auto r = eval::node_classification_report(pred, truth, 2);
  CHECK(r.per_class[1].precision == 1.0);
  CHECK(r.per_class[1].recall == 0.5);
  CHECK(r.per_class[1].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class[0].precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class[0].recall == 1.0);
  CHECK(r.per_class[0].f1 == doctest::Approx(0.8));
  CHECK(r.macro_f1 == doctest::Approx((0.8 + 2.0 / 3.0) / 2.0));
  CHECK(std::abs(r.macro_f1 - 0.733) < 1e-3);
  CHECK(r.accuracy == 0.75);

  const auto perfect = eval::node_classification_report(truth, truth, 2);
  CHECK(perfect.macro_f1 == 1.0);
  CHECK(perfect.accuracy == 1.0);

  const std::vector<int> ones(4, 1);
  CHECK(eval::node_classification_report(ones, truth, 2).accuracy == 0.5);

  const auto missing = eval::node_classification_report(std::vector<int>{0, 0}, std::vector<int>{0, 0}, 2);
  CHECK(missing.warnings.size() == 1);
  CHECK(missing.macro_f1 == 0.5);

  const auto j = nlohmann::json::parse(eval::to_json(r));
  CHECK(j["macro_f1"].get<double>() == r.macro_f1);
}

TEST_CASE("geojson") {
  CHECK(geojson::to_string({}) == R"({"type":"FeatureCollection","features":[]})");

  rs::DetectionRegion px;
  px.pixels = {{3, 4}};
  px.bbox = {3, 4, 4, 5};
  const geo::GeoTransform gt{74.0, 31.5, 1e-4, -1e-4};
  px.polygon = rs::vectorize(px, gt);
  auto second = px;
  const std::vector<rs::DetectionRegion> two{px, second};
  const auto j = nlohmann::json::parse(geojson::to_string(two));
  REQUIRE(j["features"].size() == 2);
  CHECK(j["features"][0]["properties"]["id"] == 0);
  CHECK(j["features"][1]["properties"]["id"] == 1);
  CHECK(j["features"][0]["geometry"]["type"] == "Polygon");
  CHECK(j["features"][0]["geometry"]["coordinates"][0].size() == 5);

  test::TempDir dir;
  geojson::write_geojson(two, dir / "a.geojson");
  const auto boxes = geojson::read_boxes(dir / "a.geojson");
  REQUIRE(boxes.size() == 2);
  CHECK(boxes[0].box.x0 == doctest::Approx(74.0 + 2.5e-4));
  CHECK(boxes[0].box.y1 == doctest::Approx(31.5 - 3.5e-4));

  test::spit(dir / "b.csv", "x0,y0,x1,y1,score\n0,0,1,1,0.5\n2,2,3,4,\n");
  const auto csv = geojson::read_boxes_csv(dir / "b.csv");
  REQUIRE(csv.size() == 2);
  CHECK(*csv[0].score == 0.5);
  CHECK_FALSE(csv[1].score.has_value());
  CHECK(csv[1].box == BBox{2, 2, 3, 4});
  test::spit(dir / "c.csv", "x0,y0,x1\n0,0,1\n");
  CHECK_THROWS_AS(geojson::read_boxes_csv(dir / "c.csv"), Error);
}

TEST_CASE("raster scene generator") {
  synth::SceneSpec spec;
  const auto a = synth::gen_raster_scene(spec);
  const auto b = synth::gen_raster_scene(spec);
  CHECK(a.frames == b.frames);
  CHECK(a.heights == b.heights);
  REQUIRE(a.kilns.size() == 12);
  CHECK(a.roofs.size() == 3);
  for (const auto &f : a.frames) {
    CHECK(f.bands == 3);
    for (double v : f.data) CHECK((v >= 0.0 && v <= 255.0 && v == std::round(v)));
  }
  for (const auto &r : a.roofs) CHECK(r.height_m > 3.0);
  // Objects keep their distance.
  for (std::size_t i = 0; i < a.kilns.size(); ++i)
    for (std::size_t j = i + 1; j < a.kilns.size(); ++j) {
      const double dx = double(a.kilns[i].center_col) - double(a.kilns[j].center_col);
      const double dy = double(a.kilns[i].center_row) - double(a.kilns[j].center_row);
      CHECK(std::hypot(dx, dy) >= 4.0 * double(spec.kiln_radius_px));
    }

  auto empty_spec = spec;
  empty_spec.kiln_count = 0;
  empty_spec.distractor_count = 0;
  const auto empty = synth::gen_raster_scene(empty_spec);
  CHECK(empty.kilns.empty());
  CHECK(synth::ground_truth_regions(empty).empty());

  auto always = spec;
  always.activity_probability = 1.0;
  for (const auto &k : synth::gen_raster_scene(always).kilns) CHECK(k.active_frames() == 5);

  auto crowded = spec;
  crowded.width = crowded.height = 64;
  crowded.kiln_count = 40;
  CHECK_THROWS_AS(synth::gen_raster_scene(crowded), Error);

  auto other = spec;
  other.seed = 1;
  CHECK(synth::gen_raster_scene(other).frames != a.frames);
}

TEST_CASE("scene files round trip") {
  synth::SceneSpec spec;
  spec.width = spec.height = 256;
  spec.kiln_count = 3;
  spec.distractor_count = 1;
  const auto scene = synth::gen_raster_scene(spec);
  test::TempDir dir;
  synth::write_scene(scene, dir / "png", synth::TileFormat::Png, 256);
  const auto tile = raster::read_rgb_tile(dir / "png/frame_000/tile_000.png", dir / "png/frame_000/tile_000.json");
  CHECK(tile.data == scene.frames[0].data);
  synth::write_scene(scene, dir / "kgrd", synth::TileFormat::Kgrd, 128);
  const auto q = raster::read_grid(dir / "kgrd/frame_001/tile_003.kgrd");
  CHECK(q.width == 128);
  CHECK(q.at(0, 5, 7) == scene.frames[1].at(0, 133, 135));
  CHECK(q.transform == geo::GeoTransform{spec.transform.origin_lon + 128e-4, spec.transform.origin_lat - 128e-4,
                                         1e-4, -1e-4});
  const auto gt = geojson::read_boxes(dir / "kgrd/ground_truth.geojson");
  CHECK(gt.size() == 3);
  CHECK(test::slurp(dir / "kgrd/ground_truth.geojson") == test::slurp(dir / "png/ground_truth.geojson"));
}

TEST_CASE("anisotropic labels") {
  CHECK(synth::within_axis(0.0, 0.0));
  CHECK(synth::within_axis(M_PI, 0.0));
  CHECK(synth::within_axis(M_PI / 4, 0.0));
  CHECK_FALSE(synth::within_axis(M_PI / 2, 0.0));
  CHECK(synth::within_axis(M_PI / 2, 90.0));
  CHECK(synth::within_axis(-3.0 * M_PI / 4, 0.0));

  // Nodes on an east-west line: all within the axis.
  std::vector<graph::PoiNode> line(12);
  for (std::size_t i = 0; i < 12; ++i) line[i] = {std::int64_t(i), {74.0 + 0.001 * double(i), 31.0}, {}, {}, {}};
  auto g = graph::knn_edges(line, 4);
  synth::assign_anisotropic_labels(g, 0.0);
  for (const auto &n : g.nodes) CHECK(*n.label == 1);
  synth::assign_anisotropic_labels(g, 90.0);
  for (const auto &n : g.nodes) CHECK(*n.label == 0);
}

TEST_CASE("anisotropic graph generator") {
  for (auto layout : {synth::GraphLayout::Segments, synth::GraphLayout::Uniform}) {
    double share_sum = 0.0;
    const std::uint64_t seeds = 10;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
      synth::GraphSpec spec;
      spec.seed = seed;
      spec.layout = layout;
      const auto g = synth::gen_anisotropic_graph(spec);
      CHECK(g.nodes.size() == 1000);
      CHECK(g.edges.size() == 8000);
      // Labels follow the edge rule exactly.
      std::size_t ones = 0;
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        std::size_t within = 0, total = 0;
        for (const auto &e : g.edges)
          if (e.src == i) {
            ++total;
            within += synth::within_axis(e.bearing_rad, spec.anisotropy_axis_deg) ? 1 : 0;
          }
        CHECK(*g.nodes[i].label == (2 * within > total ? 1 : 0));
        ones += *g.nodes[i].label == 1 ? 1 : 0;
      }
      const double share = double(ones) / 1000.0;
      share_sum += share;
      if (layout == synth::GraphLayout::Segments) {
        CHECK(share >= 0.35);
        CHECK(share <= 0.65);
      }
      CHECK(g.feature_names.back() == "const");
      CHECK(graph::to_json(g) == graph::to_json(synth::gen_anisotropic_graph(spec)));
    }
    // Uniform scatter: each edge is within the axis with probability 1/2, so a
    // strict majority of 8 has probability (1 - C(8,4) / 2^8) / 2 = 0.363.
    const double mean_share = share_sum / double(seeds);
    CAPTURE(mean_share);
    CHECK(mean_share >= 0.35);
    CHECK(mean_share <= 0.65);
  }
}

TEST_CASE("separable graph generator") {
  synth::SeparableSpec spec;
  const auto g = synth::gen_feature_separable_graph(spec);
  CHECK(graph::to_json(g) == graph::to_json(synth::gen_feature_separable_graph(spec)));
  // Sign of the feature mean is the Bayes rule at these class means.
  std::size_t right = 0;
  for (const auto &n : g.nodes) {
    double s = 0.0;
    for (double f : n.features) s += f;
    right += (s > 0) == (*n.label == 1) ? 1 : 0;
  }
  CHECK(double(right) / double(g.nodes.size()) >= 0.9);

  spec.sigma = 1e-9;
  const auto sharp = synth::gen_feature_separable_graph(spec);
  for (const auto &n : sharp.nodes)
    for (double f : n.features) CHECK(std::abs(std::abs(f) - 1.0) < 1e-6);
}
