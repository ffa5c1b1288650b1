// kilnkit: command-line front end. Every subcommand wraps one library
// operation; exit codes are 0 ok, 1 usage/config/IO, 2 partial failure,
// 3 numerical failure.

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kiln/checkpoint.hpp"
#include "kiln/error.hpp"
#include "kiln/geojson.hpp"
#include "kiln/graph.hpp"
#include "kiln/metrics.hpp"
#include "kiln/model.hpp"
#include "kiln/raster.hpp"
#include "kiln/rs/pipeline.hpp"
#include "kiln/synth.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using kiln::Error;
using kiln::ErrorCode;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPartial = 2;
constexpr int kExitNumerical = 3;

template <typename T> void override_if(const CLI::Option *opt, T &dst, const T &value) {
  if (opt->count() > 0) dst = value;
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

std::vector<std::vector<std::string>> read_csv(const fs::path &path, std::vector<std::string> &header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  auto split = [](const std::string &l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      cells.push_back(cell);
    }
    return cells;
  };
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, path.string() + " is empty");
  header = split(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line != "\r") rows.push_back(split(line));
  }
  return rows;
}

/// id -> label from a CSV with `id` and `label` columns.
std::map<std::int64_t, int> read_id_labels(const fs::path &path, const std::string &label_column) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, header);
  auto col = [&](const std::string &name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, path.string() + " lacks column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = col("id"), label_col = col(label_column);
  std::map<std::int64_t, int> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto &row = rows[r];
    if (row.size() <= std::max(id_col, label_col) || row[label_col].empty()) continue;
    try {
      std::size_t used = 0;
      const auto id = std::stoll(row[id_col], &used);
      const int label = std::stoi(row[label_col]);
      if (!out.emplace(id, label).second) throw Error(ErrorCode::DuplicateId, "id " + row[id_col]);
    } catch (const std::logic_error &) {
      throw Error(ErrorCode::NonNumericCell, path.string() + " row " + std::to_string(r + 2));
    }
  }
  return out;
}

int run_guarded(const std::function<int()> &fn) {
  try {
    return fn();
  } catch (const Error &e) {
    std::cerr << "kilnkit: error: " << e.what() << '\n';
    return e.code() == ErrorCode::NumericalError || e.code() == ErrorCode::NonFiniteLoss
               ? kExitNumerical
               : kExitUsage;
  } catch (const std::exception &e) {
    std::cerr << "kilnkit: error: " << e.what() << '\n';
    return kExitUsage;
  }
}

// ---------------------------------------------------------------- detect

struct DetectArgs {
  std::string input, heights, config, out, report;
  double percentile = 80.0;
  std::size_t window = 9, se_radius = 4, bins = 256, png_tile_size = 256;
  std::string scope = "scene";
  double min_threshold = 0.0;
  CLI::Option *o_percentile, *o_window, *o_se, *o_bins, *o_scope, *o_min, *o_png;
};

int run_detect(const DetectArgs &a, int jobs) {
  auto cfg = kilnkit::load_run_config(a.config);
  auto &p = cfg.detect.pipeline;
  override_if(a.o_percentile, p.percentile, a.percentile);
  override_if(a.o_window, p.window, a.window);
  override_if(a.o_se, p.se_radius, a.se_radius);
  override_if(a.o_bins, p.bins, a.bins);
  override_if(a.o_min, p.min_threshold, a.min_threshold);
  override_if(a.o_png, cfg.detect.png_tile_size, a.png_tile_size);
  if (a.o_scope->count() > 0) {
    p.threshold_scope = a.scope == "tile" ? kiln::rs::ThresholdScope::Tile : kiln::rs::ThresholdScope::Scene;
  }
  p.jobs = jobs;

  const kiln::raster::TileOptions png{cfg.detect.png_tile_size > 0, cfg.detect.png_tile_size};
  const auto tiles = kiln::rs::load_tile_directory(a.input, png);
  std::optional<kiln::raster::RasterGrid> heights;
  if (!a.heights.empty()) heights = kiln::raster::read_grid(a.heights);

  const auto result = kiln::rs::run_pipeline(tiles, heights ? &*heights : nullptr, p);
  kiln::geojson::write_geojson(result.regions, a.out);

  const auto section = kilnkit::to_json(cfg.detect);
  ordered_json report;
  report["version"] = kilnkit::kVersion;
  report["config_hash"] = kilnkit::config_hash(section);
  report["config"] = section;
  report["height_filter"] = heights.has_value();
  report["tiles_processed"] = result.tiles_processed;
  report["regions_total"] = result.regions.size();
  report["regions_rejected_by_height"] = result.regions_rejected_by_height;
  ordered_json tile_list = ordered_json::array(), failed = ordered_json::array();
  for (const auto &t : result.tiles) {
    ordered_json jt;
    jt["name"] = t.name;
    jt["threshold"] = t.threshold ? ordered_json(*t.threshold) : ordered_json(nullptr);
    jt["regions_found"] = t.regions_found;
    jt["regions_rejected"] = t.regions_rejected;
    jt["error"] = t.error ? ordered_json(*t.error) : ordered_json(nullptr);
    if (t.error) failed.push_back({{"name", t.name}, {"error", *t.error}});
    tile_list.push_back(std::move(jt));
  }
  report["tiles"] = std::move(tile_list);
  report["failed_tiles"] = std::move(failed);
  const fs::path report_path =
      a.report.empty() ? fs::path(a.out).replace_extension(".report.json") : fs::path(a.report);
  write_text(report_path, report.dump(2) + "\n");

  std::printf("tiles processed %zu/%zu, regions %zu, rejected by height %zu\n", result.tiles_processed,
              result.tiles.size(), result.regions.size(), result.regions_rejected_by_height);
  if (result.partial_failure()) {
    for (const auto &t : result.tiles) {
      if (t.error) std::fprintf(stderr, "kilnkit: tile %s failed: %s\n", t.name.c_str(), t.error->c_str());
    }
    return kExitPartial;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- graph-build

struct GraphArgs {
  std::string pois, out, config, label_column = "label";
  std::vector<std::string> rasters, features;
  std::size_t k = 8, buffer_px = 3;
  CLI::Option *o_k, *o_buffer, *o_label, *o_features;
};

int run_graph_build(const GraphArgs &a) {
  auto cfg = kilnkit::load_run_config(a.config);
  auto &s = cfg.graph;
  override_if(a.o_k, s.k, a.k);
  override_if(a.o_buffer, s.buffer_px, a.buffer_px);
  override_if(a.o_label, s.label_column, a.label_column);
  override_if(a.o_features, s.feature_columns, a.features);

  auto table = kiln::graph::load_pois(a.pois, s.feature_columns, s.label_column);
  for (const auto &r : table.rejected_rows) std::fprintf(stderr, "kilnkit: rejected %s\n", r.c_str());
  auto g = kiln::graph::knn_edges(std::move(table.nodes), s.k);
  g.feature_names = table.feature_names;
  std::vector<std::string> warnings;
  kiln::graph::impute_features(g, &warnings);
  std::vector<kiln::raster::RasterGrid> rasters;
  for (const auto &path : a.rasters) rasters.push_back(kiln::raster::read_grid(path));
  kiln::graph::append_raster_features(g, rasters, s.buffer_px, &warnings);
  for (const auto &w : warnings) std::fprintf(stderr, "kilnkit: warning: %s\n", w.c_str());
  kiln::graph::write_graph(g, a.out);
  std::printf("nodes %zu, edges %zu, features %zu\n", g.nodes.size(), g.edges.size(), g.feature_count());
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string graph, config, out, metrics, variant = "climategraph", class_weights = "inverse_frequency";
  std::uint64_t seed = 0;
  std::size_t epochs = 300, hidden_dim = 32, layers = 2, harmonics = 4, replicates = 1;
  double lr = 1e-3;
  CLI::Option *o_seed, *o_epochs, *o_hidden, *o_layers, *o_harmonics, *o_lr, *o_variant, *o_weights;
};

kiln::model::TrainConfig resolve_train(const TrainArgs &a) {
  auto cfg = kilnkit::load_run_config(a.config);
  auto &t = cfg.train;
  override_if(a.o_seed, t.seed, a.seed);
  override_if(a.o_epochs, t.epochs, a.epochs);
  override_if(a.o_hidden, t.hidden_dim, a.hidden_dim);
  override_if(a.o_layers, t.layers, a.layers);
  override_if(a.o_harmonics, t.harmonics, a.harmonics);
  override_if(a.o_lr, t.learning_rate, a.lr);
  if (a.o_variant->count() > 0) t.variant = kiln::model::parse_variant(a.variant);
  if (a.o_weights->count() > 0) t.class_weight_mode = kiln::model::parse_class_weight_mode(a.class_weights);
  t.validate();
  return t;
}

int run_train(const TrainArgs &a) {
  const auto base = resolve_train(a);
  if (a.replicates < 1) throw Error(ErrorCode::InvalidArgument, "--replicates must be >= 1");
  const auto g = kiln::graph::read_graph(a.graph);

  const auto R = static_cast<std::int64_t>(a.replicates);
  std::vector<kiln::model::TrainResult> results(a.replicates);
  std::vector<std::string> errors(a.replicates);
  std::vector<ErrorCode> codes(a.replicates, ErrorCode::InvalidArgument);
#pragma omp parallel for schedule(dynamic) if (R > 1)
  for (std::int64_t r = 0; r < R; ++r) {
    auto cfg = base;
    cfg.seed = base.seed + static_cast<std::uint64_t>(r);
    try {
      results[static_cast<std::size_t>(r)] = kiln::model::train(g, cfg);
    } catch (const Error &e) {
      errors[static_cast<std::size_t>(r)] = e.what();
      codes[static_cast<std::size_t>(r)] = e.code();
    } catch (const std::exception &e) {
      errors[static_cast<std::size_t>(r)] = e.what();
    }
  }
  for (std::size_t r = 0; r < errors.size(); ++r) {
    if (!errors[r].empty()) throw Error(codes[r], "replicate " + std::to_string(r) + ": " + errors[r]);
  }

  if (!a.out.empty()) kiln::model::write_checkpoint(results.front().checkpoint, a.out);
  if (!a.metrics.empty()) kiln::model::write_metrics_csv(results.front().log, a.metrics);

  double mean = 0.0;
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto &res = results[r];
    std::printf("replicate %zu seed %llu: best epoch %zu, val macro-F1 %.4f, test macro-F1 %.4f\n", r,
                static_cast<unsigned long long>(base.seed + r), res.checkpoint.epoch,
                res.checkpoint.val_macro_f1, res.test_macro_f1);
    mean += res.test_macro_f1;
  }
  mean /= static_cast<double>(results.size());
  double var = 0.0;
  for (const auto &res : results) var += (res.test_macro_f1 - mean) * (res.test_macro_f1 - mean);
  const double sd = results.size() > 1 ? std::sqrt(var / static_cast<double>(results.size() - 1)) : 0.0;
  std::printf("test macro-F1 %.4f +- %.4f over %zu replicate(s) [%s]\n", mean, sd, results.size(),
              kiln::model::to_string(base.variant).c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- predict

int run_predict(const std::string &graph_path, const std::string &ckpt_path, const std::string &out) {
  const auto g = kiln::graph::read_graph(graph_path);
  const auto ck = kiln::model::read_checkpoint(ckpt_path);
  const auto pred = kiln::model::predict(g, ck);
  std::string text = "id,label";
  for (std::size_t c = 0; c < pred.num_classes; ++c) text += ",p_" + std::to_string(c);
  text += '\n';
  char buf[64];
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    text += std::to_string(g.nodes[i].id) + "," + std::to_string(pred.label[i]);
    for (std::size_t c = 0; c < pred.num_classes; ++c) {
      std::snprintf(buf, sizeof buf, ",%.17g", pred.probability[i * pred.num_classes + c]);
      text += buf;
    }
    text += '\n';
  }
  write_text(out, text);
  std::printf("predicted %zu nodes\n", g.nodes.size());
  return kExitOk;
}

// ---------------------------------------------------------------- eval-nodes

struct EvalNodesArgs {
  std::string pred, truth, checkpoint, split = "all", format = "table", out, config;
  int num_classes = 2;
  CLI::Option *o_classes;
};

int run_eval_nodes(const EvalNodesArgs &a) {
  auto cfg = kilnkit::load_run_config(a.config);
  override_if(a.o_classes, cfg.eval.num_classes, a.num_classes);
  const auto predicted = read_id_labels(a.pred, "label");

  std::map<std::int64_t, int> truth;
  std::vector<std::int64_t> order; // ids to score, in truth order
  if (fs::path(a.truth).extension() == ".json") {
    const auto g = kiln::graph::read_graph(a.truth);
    std::vector<std::size_t> positions;
    if (a.split == "all") {
      for (std::size_t i = 0; i < g.nodes.size(); ++i) positions.push_back(i);
    } else {
      if (a.checkpoint.empty()) throw Error(ErrorCode::InvalidArgument, "--split needs --checkpoint");
      const auto ck = kiln::model::read_checkpoint(a.checkpoint);
      if (a.split == "train") positions = ck.split.train;
      else if (a.split == "val") positions = ck.split.val;
      else if (a.split == "test") positions = ck.split.test;
      else throw Error(ErrorCode::InvalidArgument, "unknown split " + a.split);
    }
    for (auto i : positions) {
      if (i >= g.nodes.size()) throw Error(ErrorCode::InvalidArgument, "split does not match the graph");
      if (!g.nodes[i].label) continue;
      truth[g.nodes[i].id] = *g.nodes[i].label;
      order.push_back(g.nodes[i].id);
    }
  } else {
    if (a.split != "all") throw Error(ErrorCode::InvalidArgument, "--split needs a graph JSON as --truth");
    truth = read_id_labels(a.truth, "label");
    for (const auto &[id, _] : truth) order.push_back(id);
  }

  std::vector<int> p, t;
  for (auto id : order) {
    const auto it = predicted.find(id);
    if (it == predicted.end()) {
      throw Error(ErrorCode::LengthMismatch, "no prediction for node " + std::to_string(id));
    }
    p.push_back(it->second);
    t.push_back(truth.at(id));
  }
  const auto report = kiln::eval::node_classification_report(p, t, cfg.eval.num_classes);
  const std::string json_text = kiln::eval::to_json(report) + "\n";
  if (!a.out.empty()) write_text(a.out, json_text);
  std::fputs((a.format == "json" ? json_text : kiln::eval::to_table(report)).c_str(), stdout);
  return kExitOk;
}

// ---------------------------------------------------------------- eval-detections

std::vector<kiln::BBox> load_boxes(const fs::path &path) {
  const auto scored = path.extension() == ".csv" ? kiln::geojson::read_boxes_csv(path)
                                                 : kiln::geojson::read_boxes(path);
  std::vector<kiln::BBox> boxes;
  for (const auto &s : scored) {
    if (!s.box.valid()) throw Error(ErrorCode::InvalidArgument, path.string() + " has an invalid box");
    boxes.push_back(s.box);
  }
  return boxes;
}

struct EvalDetArgs {
  std::string pred, truth, format = "table", out, config;
  double iou = 0.3;
  CLI::Option *o_iou;
};

int run_eval_detections(const EvalDetArgs &a) {
  auto cfg = kilnkit::load_run_config(a.config);
  override_if(a.o_iou, cfg.eval.iou_threshold, a.iou);
  const auto preds = load_boxes(a.pred);
  const auto gts = load_boxes(a.truth);
  const auto match = kiln::eval::match_detections(preds, gts, cfg.eval.iou_threshold);
  const auto report = kiln::eval::detection_report(match);
  const std::string json_text = kiln::eval::to_json(report) + "\n";
  if (!a.out.empty()) write_text(a.out, json_text);
  std::fputs((a.format == "json" ? json_text : kiln::eval::to_table(report)).c_str(), stdout);
  return kExitOk;
}

// ---------------------------------------------------------------- synth

int run_synth_raster(const kiln::synth::SceneSpec &spec, const std::string &out, const std::string &format,
                     std::size_t tile_size) {
  const auto scene = kiln::synth::gen_raster_scene(spec);
  kiln::synth::write_scene(scene, out, format == "png" ? kiln::synth::TileFormat::Png : kiln::synth::TileFormat::Kgrd,
                           tile_size);
  std::size_t firing_twice = 0;
  for (const auto &k : scene.kilns) firing_twice += k.active_frames() >= 2 ? 1 : 0;
  std::printf("kilns %zu (%zu firing in >= 2 frames), roofs %zu, frames %zu\n", scene.kilns.size(),
              firing_twice, scene.roofs.size(), scene.frames.size());
  return kExitOk;
}

struct SynthGraphArgs {
  std::string out, kind = "anisotropic", layout = "segments";
  kiln::synth::GraphSpec aniso;
  kiln::synth::SeparableSpec sep;
  std::uint64_t seed = 0;
  std::size_t nodes = 1000, k = 8;
};

int run_synth_graph(SynthGraphArgs a) {
  kiln::graph::SpatialGraph g;
  if (a.kind == "anisotropic") {
    a.aniso.seed = a.seed;
    a.aniso.node_count = a.nodes;
    a.aniso.k = a.k;
    a.aniso.layout = a.layout == "uniform" ? kiln::synth::GraphLayout::Uniform : kiln::synth::GraphLayout::Segments;
    g = kiln::synth::gen_anisotropic_graph(a.aniso);
  } else {
    a.sep.seed = a.seed;
    a.sep.node_count = a.nodes;
    a.sep.k = a.k;
    g = kiln::synth::gen_feature_separable_graph(a.sep);
  }
  kiln::graph::write_graph(g, a.out);
  std::size_t positives = 0;
  for (const auto &n : g.nodes) positives += n.label && *n.label == 1 ? 1 : 0;
  std::printf("nodes %zu, edges %zu, class-1 share %.3f\n", g.nodes.size(), g.edges.size(),
              static_cast<double>(positives) / static_cast<double>(g.nodes.size()));
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

int run_gradcheck(const kiln::model::TrainConfig &cfg, std::size_t nodes, std::size_t k, double eps,
                  double tolerance) {
  const auto r = kiln::model::gradient_check(cfg, nodes, k, eps);
  std::printf("max relative error %.6e over %zu parameters\n", r.max_relative_error, r.parameters);
  if (!(r.max_relative_error < tolerance)) {
    std::fprintf(stderr, "kilnkit: gradient check exceeds tolerance %.1e\n", tolerance);
    return kExitNumerical;
  }
  return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"kilnkit: brick kiln detection from imagery and spatial graph classification"};
  app.set_version_flag("--version", kilnkit::kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  int jobs = 0;
  app.add_option("--jobs", jobs, "Worker threads (0 = all logical cores)")->capture_default_str();

  std::function<int()> action;

  // detect
  DetectArgs det;
  auto *detect = app.add_subcommand("detect", "Detect kilns in a directory of frame tiles");
  detect->add_option("--input", det.input, "Directory of frame subdirectories holding tiles")->required();
  detect->add_option("--heights", det.heights, "KGRD height grid in metres (enables the height filter)");
  detect->add_option("--config", det.config, "Run config JSON");
  detect->add_option("--out", det.out, "Output GeoJSON")->required();
  detect->add_option("--report", det.report, "Run report JSON (default: <out> with extension .report.json)");
  det.o_percentile = detect->add_option("--percentile", det.percentile, "Composite percentile")->capture_default_str();
  det.o_window = detect->add_option("--window", det.window, "Local maximum window (odd)")->capture_default_str();
  det.o_se = detect->add_option("--se-radius", det.se_radius, "Closing radius in pixels")->capture_default_str();
  det.o_bins = detect->add_option("--bins", det.bins, "Otsu histogram bins")->capture_default_str();
  det.o_scope = detect->add_option("--threshold-scope", det.scope, "Otsu over the whole scene or per tile")
                    ->check(CLI::IsMember({"scene", "tile"}))
                    ->capture_default_str();
  det.o_min = detect->add_option("--min-threshold", det.min_threshold, "Floor on the index threshold")->capture_default_str();
  det.o_png = detect->add_option("--png-tile-size", det.png_tile_size, "Required PNG tile size (0 = any)")->capture_default_str();
  detect->callback([&] { action = [&] { return run_detect(det, jobs); }; });

  // graph-build
  GraphArgs ga;
  auto *gb = app.add_subcommand("graph-build", "Build a k-NN POI graph with raster features");
  gb->add_option("--pois", ga.pois, "POI CSV (id,lon,lat[,label],features...)")->required();
  gb->add_option("--raster", ga.rasters, "KGRD raster(s) to sample");
  gb->add_option("--out", ga.out, "Output graph JSON")->required();
  gb->add_option("--config", ga.config, "Run config JSON");
  ga.o_k = gb->add_option("--k", ga.k, "Neighbours per node")->capture_default_str();
  ga.o_buffer = gb->add_option("--buffer-px", ga.buffer_px, "Imputation window half-size")->capture_default_str();
  ga.o_label = gb->add_option("--label-column", ga.label_column, "Label column (empty = none)")->capture_default_str();
  ga.o_features = gb->add_option("--features", ga.features, "Feature columns (default: all others)")->delimiter(',');
  gb->callback([&] { action = [&] { return run_graph_build(ga); }; });

  // train
  TrainArgs ta;
  auto *tr = app.add_subcommand("train", "Train a graph model on a labelled graph");
  tr->add_option("--graph", ta.graph, "Graph JSON")->required();
  tr->add_option("--config", ta.config, "Run config JSON");
  tr->add_option("--out", ta.out, "Checkpoint JSON (first replicate)");
  tr->add_option("--metrics", ta.metrics, "Per-epoch metrics CSV (first replicate)");
  ta.o_seed = tr->add_option("--seed", ta.seed, "Seed (replicate r uses seed + r)")->capture_default_str();
  ta.o_epochs = tr->add_option("--epochs", ta.epochs, "Epochs")->capture_default_str();
  ta.o_lr = tr->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  ta.o_hidden = tr->add_option("--hidden-dim", ta.hidden_dim, "Hidden width")->capture_default_str();
  ta.o_layers = tr->add_option("--layers", ta.layers, "Message-passing layers")->capture_default_str();
  ta.o_harmonics = tr->add_option("--harmonics", ta.harmonics, "Kernel harmonics L")->capture_default_str();
  ta.o_variant = tr->add_option("--variant", ta.variant, "Model variant")
                     ->check(CLI::IsMember({"climategraph", "isotropic_mean", "uniform_attention"}))
                     ->capture_default_str();
  ta.o_weights = tr->add_option("--class-weights", ta.class_weights, "Loss class weights")
                     ->check(CLI::IsMember({"uniform", "inverse_frequency"}))
                     ->capture_default_str();
  tr->add_option("--replicates", ta.replicates, "Seeded replicate runs")->capture_default_str();
  tr->callback([&] { action = [&] { return run_train(ta); }; });

  // predict
  std::string pr_graph, pr_ckpt, pr_out;
  auto *pr = app.add_subcommand("predict", "Predict node classes with a checkpoint");
  pr->add_option("--graph", pr_graph, "Graph JSON")->required();
  pr->add_option("--checkpoint", pr_ckpt, "Checkpoint JSON")->required();
  pr->add_option("--out", pr_out, "Predictions CSV (id,label,p_0..)")->required();
  pr->callback([&] { action = [&] { return run_predict(pr_graph, pr_ckpt, pr_out); }; });

  // eval-nodes
  EvalNodesArgs en;
  auto *evn = app.add_subcommand("eval-nodes", "Score node predictions against labels");
  evn->add_option("--pred", en.pred, "Predictions CSV with id,label")->required();
  evn->add_option("--truth", en.truth, "Graph JSON or CSV with id,label")->required();
  evn->add_option("--checkpoint", en.checkpoint, "Checkpoint holding the split");
  evn->add_option("--split", en.split, "Nodes to score")
      ->check(CLI::IsMember({"all", "train", "val", "test"}))
      ->capture_default_str();
  en.o_classes = evn->add_option("--num-classes", en.num_classes, "Class count C")->capture_default_str();
  evn->add_option("--format", en.format, "stdout format")->check(CLI::IsMember({"table", "json"}))->capture_default_str();
  evn->add_option("--out", en.out, "Also write the JSON report here");
  evn->add_option("--config", en.config, "Run config JSON");
  evn->callback([&] { action = [&] { return run_eval_nodes(en); }; });

  // eval-detections
  EvalDetArgs ed;
  auto *evd = app.add_subcommand("eval-detections", "Match predicted regions to ground truth");
  evd->add_option("--pred", ed.pred, "Predictions (GeoJSON or CSV x0,y0,x1,y1)")->required();
  evd->add_option("--truth", ed.truth, "Ground truth (GeoJSON or CSV)")->required();
  ed.o_iou = evd->add_option("--iou", ed.iou, "IoU threshold (inclusive)")->capture_default_str();
  evd->add_option("--format", ed.format, "stdout format")->check(CLI::IsMember({"table", "json"}))->capture_default_str();
  evd->add_option("--out", ed.out, "Also write the JSON report here");
  evd->add_option("--config", ed.config, "Run config JSON");
  evd->callback([&] { action = [&] { return run_eval_detections(ed); }; });

  // synth
  auto *sy = app.add_subcommand("synth", "Generate synthetic inputs");
  sy->require_subcommand(1);
  kiln::synth::SceneSpec scene;
  std::string sr_out, sr_format = "kgrd";
  std::size_t sr_tile = 0;
  auto *sr = sy->add_subcommand("raster", "Kiln scene: frames, heights and ground truth");
  sr->add_option("--out", sr_out, "Output directory")->required();
  sr->add_option("--seed", scene.seed, "Seed")->capture_default_str();
  sr->add_option("--width", scene.width, "Scene width")->capture_default_str();
  sr->add_option("--height", scene.height, "Scene height")->capture_default_str();
  sr->add_option("--frames", scene.frames, "Frames")->capture_default_str();
  sr->add_option("--kilns", scene.kiln_count, "Kilns")->capture_default_str();
  sr->add_option("--radius", scene.kiln_radius_px, "Kiln radius in pixels")->capture_default_str();
  sr->add_option("--activity", scene.activity_probability, "Per-frame firing probability")->capture_default_str();
  sr->add_option("--distractors", scene.distractor_count, "Tall red roofs")->capture_default_str();
  sr->add_option("--noise", scene.noise_sigma, "Pixel noise sigma")->capture_default_str();
  sr->add_option("--format", sr_format, "Tile format")->check(CLI::IsMember({"kgrd", "png"}))->capture_default_str();
  sr->add_option("--tile-size", sr_tile, "Tile size (0 = whole scene)")->capture_default_str();
  sr->callback([&] { action = [&] { return run_synth_raster(scene, sr_out, sr_format, sr_tile); }; });

  SynthGraphArgs sg;
  auto *sgc = sy->add_subcommand("graph", "Labelled spatial graph");
  sgc->add_option("--out", sg.out, "Output graph JSON")->required();
  sgc->add_option("--kind", sg.kind, "Generator")->check(CLI::IsMember({"anisotropic", "separable"}))->capture_default_str();
  sgc->add_option("--seed", sg.seed, "Seed")->capture_default_str();
  sgc->add_option("--nodes", sg.nodes, "Node count")->capture_default_str();
  sgc->add_option("--k", sg.k, "Neighbours per node")->capture_default_str();
  sgc->add_option("--axis", sg.aniso.anisotropy_axis_deg, "Anisotropy axis in degrees (anisotropic)")->capture_default_str();
  sgc->add_option("--layout", sg.layout, "Node layout (anisotropic)")->check(CLI::IsMember({"segments", "uniform"}))->capture_default_str();
  sgc->add_option("--noise-features", sg.aniso.noise_features, "Noise features (anisotropic)")->capture_default_str();
  sgc->add_option("--features", sg.sep.features, "Feature count (separable)")->capture_default_str();
  sgc->add_option("--sigma", sg.sep.sigma, "Class spread (separable)")->capture_default_str();
  sgc->callback([&] { action = [&] { return run_synth_graph(sg); }; });

  // gradcheck
  kiln::model::TrainConfig gc;
  std::size_t gc_nodes = 12, gc_k = 4;
  double gc_eps = 1e-5, gc_tol = 1e-4;
  auto *gcc = app.add_subcommand("gradcheck", "Finite-difference check of the model gradients");
  gcc->add_option("--seed", gc.seed, "Seed")->capture_default_str();
  gcc->add_option("--nodes", gc_nodes, "Graph size")->capture_default_str();
  gcc->add_option("--k", gc_k, "Neighbours per node")->capture_default_str();
  gcc->add_option("--layers", gc.layers, "Layers")->capture_default_str();
  gcc->add_option("--harmonics", gc.harmonics, "Kernel harmonics L")->capture_default_str();
  gcc->add_option("--hidden-dim", gc.hidden_dim, "Hidden width")->capture_default_str();
  gcc->add_option("--eps", gc_eps, "Central difference step")->capture_default_str();
  gcc->add_option("--tolerance", gc_tol, "Largest accepted relative error")->capture_default_str();
  gcc->callback([&] { action = [&] { return run_gradcheck(gc, gc_nodes, gc_k, gc_eps, gc_tol); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (jobs < 0) {
    std::cerr << "kilnkit: error: --jobs must be >= 0\n";
    return kExitUsage;
  }
  if (jobs > 0) omp_set_num_threads(jobs);
  return run_guarded(action);
}
