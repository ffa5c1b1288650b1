#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "kiln/checkpoint.hpp"
#include "kiln/error.hpp"
#include "kiln/model.hpp"
#include "kiln/synth.hpp"
#include "model_oracle.hpp"
#include "test_util.hpp"

using namespace kiln;
using model::TrainConfig;
using model::Variant;

namespace {

ErrorCode code_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Io;
}

TrainConfig small_config(Variant v = Variant::ClimateGraph) {
  TrainConfig c;
  c.variant = v;
  c.hidden_dim = 6;
  c.harmonics = 3;
  return c;
}

} // namespace

TEST_CASE("kernel and attention hand values") {
  const std::vector<double> k1{1.0}, m1{0.0};
  for (double th : {-3.0, 0.0, 1.2}) CHECK(model::kernel_eval(th, k1, m1) == 1.0);
  const std::vector<double> k2{0.5, 2.0}, m2{0.0, 0.3};
  CHECK(model::kernel_eval(0.7, k2, m2) == doctest::Approx(0.5 + 2.0 * std::cos(0.7 - 0.3)));

  ad::Param Wh("Wh", 1, 1, 1.0), a("a", 1, 5, 1.0);
  const std::vector<double> h{1.0}, phi{0.5, 0.0, 1.0};
  CHECK(model::attention_logit(h, h, phi, Wh, a) == 3.5);
  ad::Param zero("a", 1, 5, 0.0);
  CHECK(model::attention_logit(h, h, phi, Wh, zero) == 0.0);
  ad::Param neg("a", 1, 5, 0.0);
  neg.value[2] = -4.0; // -4 * 0.5 = -2
  CHECK(model::attention_logit(h, h, phi, Wh, neg, 0.2) == doctest::Approx(-0.4));
}

TEST_CASE("forward matches the plain-loop oracle") {
  for (auto v : {Variant::ClimateGraph, Variant::IsotropicMean, Variant::UniformAttention}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      CAPTURE(seed);
      const auto g = oracle::random_graph(seed, 25, 5, 3);
      auto cfg = small_config(v);
      cfg.layers = 1 + seed % 3;
      auto params = model::init_params(cfg, 4);
      oracle::randomize(params, seed + 50);
      const double scale = 1500.0;
      const auto in = model::make_inputs(g, scale, cfg);
      const auto got = model::forward_values(in, params, cfg);
      const auto want = oracle::forward(g, params, cfg, scale);
      REQUIRE(got.size() == want.logits.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want.logits[i]).epsilon(1e-12));

      ad::Tape tape;
      std::vector<ad::Tensor> alphas;
      model::forward(tape, in, params, cfg, &alphas);
      REQUIRE(alphas.size() == cfg.layers);
      for (std::size_t l = 0; l < cfg.layers; ++l)
        for (std::size_t e = 0; e < g.edges.size(); ++e)
          CHECK(alphas[l].value(e, 0) == doctest::Approx(want.alpha[l][e]).epsilon(1e-12));
    }
  }
}

TEST_CASE("layer without neighbors") {
  graph::SpatialGraph g;
  g.nodes.push_back({0, {74, 31}, {0.5, -2.0}, {false, false}, 0});
  g.feature_names = {"x", "y"};
  auto cfg = small_config();
  cfg.input_bias = false;
  auto params = model::init_params(cfg, 2);
  oracle::randomize(params, 3);
  const auto in = model::make_inputs(g, 1.0, cfg);
  ad::Tape tape;
  auto lt = model::bind_constant(tape, params.layers[0]);
  auto H = tape.constant(1, 2, {0.5, -2.0});
  auto out = model::layer_forward(tape, H, in, lt, cfg.variant, true, 0.2);
  const auto pre = oracle::apply(params.layers[0].W0, in.features.data());
  for (std::size_t d = 0; d < pre.size(); ++d) CHECK(out.value(0, d) == doctest::Approx(oracle::lrelu(pre[d], 0.2)));
}

TEST_CASE("zero classifier returns the bias") {
  const auto g = oracle::random_graph(4, 10, 3, 2);
  auto cfg = small_config();
  auto params = model::init_params(cfg, 3);
  std::fill(params.Wc.value.begin(), params.Wc.value.end(), 0.0);
  params.bc.value = {0.25, -1.5};
  const auto logits = model::forward_values(model::make_inputs(g, 1000.0, cfg), params, cfg);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(logits[i * 2] == 0.25);
    CHECK(logits[i * 2 + 1] == -1.5);
  }
}

TEST_CASE("class weights") {
  std::vector<int> labels(100, 0);
  for (std::size_t i = 90; i < 100; ++i) labels[i] = 1;
  std::vector<std::size_t> all(100);
  std::iota(all.begin(), all.end(), 0);
  const auto w = model::class_weights(labels, all, 2, model::ClassWeightMode::InverseFrequency);
  CHECK(w[0] == doctest::Approx(100.0 / 180.0).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(w[0] == doctest::Approx(0.556).epsilon(1e-3));
  CHECK(model::class_weights(labels, all, 2, model::ClassWeightMode::Uniform) == std::vector<double>{1, 1});

  const std::vector<int> balanced{0, 1, 0, 1};
  const std::vector<std::size_t> four{0, 1, 2, 3};
  CHECK(model::class_weights(balanced, four, 2, model::ClassWeightMode::InverseFrequency) ==
        std::vector<double>{1, 1});
  const std::vector<std::size_t> zeros_only{0, 2};
  CHECK(code_of([&] { model::class_weights(balanced, zeros_only, 2, model::ClassWeightMode::InverseFrequency); }) ==
        ErrorCode::MissingClass);
}

TEST_CASE("prediction from logits") {
  const std::vector<double> l{3.0, 1.0, 2.0, 2.0};
  const auto p = model::predict_from_logits(l, 2);
  CHECK(p.label == std::vector<int>{0, 0});
  CHECK(p.probability[0] == doctest::Approx(0.881).epsilon(1e-3));
  CHECK(std::abs(p.probability[0] - 0.881) < 1e-3);
  CHECK(std::abs(p.probability[1] - 0.119) < 1e-3);
  CHECK(p.probability[2] == 0.5);
  CHECK(std::abs(p.probability[0] + p.probability[1] - 1.0) < 1e-12);
}

TEST_CASE("stratified split") {
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) labels.push_back(i < 150 ? 0 : (i < 190 ? 1 : -1));
  TrainConfig cfg;
  const auto s = model::stratified_split(labels, cfg);
  std::set<std::size_t> seen;
  for (const auto *part : {&s.train, &s.val, &s.test}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    for (auto i : *part) {
      CHECK(labels[i] >= 0);
      CHECK(seen.insert(i).second);
    }
  }
  CHECK(seen.size() == 190);
  auto count = [&](const std::vector<std::size_t> &part, int c) {
    return std::count_if(part.begin(), part.end(), [&](auto i) { return labels[i] == c; });
  };
  CHECK(count(s.train, 0) == 90);
  CHECK(count(s.train, 1) == 24);
  CHECK(count(s.val, 0) == 30);
  CHECK(count(s.val, 1) == 8);

  const auto again = model::stratified_split(labels, cfg);
  CHECK(again.train == s.train);
  cfg.seed = 1;
  CHECK(model::stratified_split(labels, cfg).train != s.train);
}

TEST_CASE("distance scale is the 95th percentile by nearest rank") {
  const auto g = oracle::random_graph(8, 40, 4, 1);
  std::vector<std::size_t> nodes{0, 3, 5, 7, 11, 20, 21, 39};
  std::vector<double> d;
  for (const auto &e : g.edges)
    if (std::find(nodes.begin(), nodes.end(), e.src) != nodes.end()) d.push_back(e.distance_m);
  std::sort(d.begin(), d.end());
  const std::size_t rank = (95 * d.size() + 99) / 100;
  CHECK(model::distance_scale(g, nodes) == d[rank - 1]);
  CHECK(model::distance_scale(g, std::vector<std::size_t>{}) == 1.0);
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.harmonics = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
  c = {};
  c.train_fraction = 0.9;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
  c = {};
  c.learning_rate = -1;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
  CHECK(model::parse_variant("isotropic_mean") == Variant::IsotropicMean);
  CHECK(code_of([] { model::parse_variant("gat"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("gradient check") {
  const auto r = model::gradient_check(TrainConfig{});
  CHECK(r.max_relative_error < 1e-4);
  CHECK(r.parameters > 3000);
  auto iso = TrainConfig{};
  iso.variant = Variant::UniformAttention;
  CHECK(model::gradient_check(iso, 10, 3).max_relative_error < 1e-4);
}

TEST_CASE("training fits a separable graph and is deterministic") {
  synth::SeparableSpec spec;
  spec.node_count = 300;
  const auto g = synth::gen_feature_separable_graph(spec);
  TrainConfig cfg;
  cfg.epochs = 200;
  const auto r = model::train(g, cfg);
  REQUIRE(r.log.size() == 200);
  CHECK(r.log.back().train_loss < 0.05);
  CHECK(r.test_macro_f1 >= 0.9);
  CHECK(r.checkpoint.epoch >= 1);
  CHECK(r.checkpoint.val_macro_f1 == doctest::Approx(r.log[r.checkpoint.epoch - 1].val_macro_f1));
  for (const auto &e : r.log) CHECK(e.val_macro_f1 <= r.checkpoint.val_macro_f1);

  const auto again = model::train(g, cfg);
  CHECK(model::metrics_csv(again.log) == model::metrics_csv(r.log));
  CHECK(model::to_json(again.checkpoint) == model::to_json(r.checkpoint));
}

TEST_CASE("checkpoint round trip predicts identically") {
  const auto g = synth::gen_feature_separable_graph({.seed = 3, .node_count = 120});
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.hidden_dim = 8;
  const auto r = model::train(g, cfg);
  test::TempDir dir;
  model::write_checkpoint(r.checkpoint, dir / "ck.json");
  const auto back = model::read_checkpoint(dir / "ck.json");
  CHECK(model::to_json(back) == model::to_json(r.checkpoint));
  const auto a = model::predict(g, r.checkpoint);
  const auto b = model::predict(g, back);
  CHECK(a.label == b.label);
  CHECK(a.probability == b.probability);

  CHECK(code_of([] { model::checkpoint_from_json("{}"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("training failures") {
  const auto g = synth::gen_feature_separable_graph({.seed = 1, .node_count = 80});
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 1e200;
  CHECK(code_of([&] { model::train(g, cfg); }) == ErrorCode::NonFiniteLoss);

  auto one_class = g;
  for (auto &n : one_class.nodes) n.label = 0;
  CHECK(code_of([&] { model::train(one_class, TrainConfig{}); }) == ErrorCode::MissingClass);
}
