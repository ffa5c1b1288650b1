#include "kiln/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include "kiln/error.hpp"

namespace kiln::model {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json to_json(const TrainConfig &c) {
  ordered_json j;
  j["variant"] = to_string(c.variant);
  j["layers"] = c.layers;
  j["hidden_dim"] = c.hidden_dim;
  j["harmonics"] = c.harmonics;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["class_weight_mode"] = to_string(c.class_weight_mode);
  j["train_fraction"] = c.train_fraction;
  j["val_fraction"] = c.val_fraction;
  j["test_fraction"] = c.test_fraction;
  j["leaky_slope"] = c.leaky_slope;
  j["num_classes"] = c.num_classes;
  j["input_bias"] = c.input_bias;
  return j;
}

TrainConfig train_config_from_json(const json &j, TrainConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "train config must be an object");
  try {
    for (const auto &[key, v] : j.items()) {
      if (key == "variant") c.variant = parse_variant(v.get<std::string>());
      else if (key == "layers") c.layers = v.get<std::size_t>();
      else if (key == "hidden_dim") c.hidden_dim = v.get<std::size_t>();
      else if (key == "harmonics") c.harmonics = v.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "class_weight_mode") c.class_weight_mode = parse_class_weight_mode(v.get<std::string>());
      else if (key == "train_fraction") c.train_fraction = v.get<double>();
      else if (key == "val_fraction") c.val_fraction = v.get<double>();
      else if (key == "test_fraction") c.test_fraction = v.get<double>();
      else if (key == "leaky_slope") c.leaky_slope = v.get<double>();
      else if (key == "num_classes") c.num_classes = v.get<int>();
      else if (key == "input_bias") c.input_bias = v.get<bool>();
      else throw Error(ErrorCode::InvalidArgument, "unknown train config key '" + key + "'");
    }
  } catch (const json::exception &e) {
    throw Error(ErrorCode::InvalidArgument, std::string("train config: ") + e.what());
  }
  return c;
}

namespace {

ordered_json param_json(const ad::Param &p) {
  return {{"shape", {p.rows, p.cols}}, {"values", p.value}};
}

void load_param(const json &params, ad::Param &p) {
  if (!params.contains(p.name)) {
    throw Error(ErrorCode::InvalidArgument, "checkpoint lacks parameter " + p.name);
  }
  const auto &jp = params.at(p.name);
  const auto shape = jp.at("shape").get<std::vector<std::size_t>>();
  auto values = jp.at("values").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] != p.rows || shape[1] != p.cols || values.size() != p.value.size()) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint parameter " + p.name + " has the wrong shape");
  }
  p.value = std::move(values);
}

} // namespace

std::string to_json(const Checkpoint &ck) {
  ordered_json j;
  j["config"] = to_json(ck.config);
  j["feature_stats"] = {{"mean", ck.feature_stats.mean}, {"std", ck.feature_stats.std}};
  j["distance_scale"] = ck.distance_scale;
  j["split"] = {{"train", ck.split.train}, {"val", ck.split.val}, {"test", ck.split.test}};
  j["input_dim"] = ck.params.layers.empty() ? ck.params.Wc.cols : ck.params.layers.front().W0.cols;
  ordered_json params = ordered_json::object();
  for (const auto *p : ck.params.all()) params[p->name] = param_json(*p);
  j["params"] = std::move(params);
  j["epoch"] = ck.epoch;
  j["val_macro_f1"] = ck.val_macro_f1;
  return j.dump(1);
}

Checkpoint checkpoint_from_json(const std::string &text) {
  Checkpoint ck;
  try {
    const json j = json::parse(text);
    ck.config = train_config_from_json(j.at("config"));
    ck.config.validate();
    ck.feature_stats.mean = j.at("feature_stats").at("mean").get<std::vector<double>>();
    ck.feature_stats.std = j.at("feature_stats").at("std").get<std::vector<double>>();
    ck.distance_scale = j.at("distance_scale").get<double>();
    ck.split.train = j.at("split").at("train").get<std::vector<std::size_t>>();
    ck.split.val = j.at("split").at("val").get<std::vector<std::size_t>>();
    ck.split.test = j.at("split").at("test").get<std::vector<std::size_t>>();
    ck.params = init_params(ck.config, j.at("input_dim").get<std::size_t>());
    for (auto *p : ck.params.all()) load_param(j.at("params"), *p);
    ck.epoch = j.at("epoch").get<std::size_t>();
    ck.val_macro_f1 = j.at("val_macro_f1").get<double>();
  } catch (const json::exception &e) {
    throw Error(ErrorCode::InvalidArgument, std::string("checkpoint: ") + e.what());
  }
  return ck;
}

void write_checkpoint(const Checkpoint &ck, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json(ck) << '\n';
}

Checkpoint read_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_json(text);
}

std::string metrics_csv(std::span<const EpochLog> log) {
  std::string out = "epoch,train_loss,val_loss,val_macro_f1\n";
  char line[128];
  for (const auto &row : log) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", row.epoch, row.train_loss,
                  row.val_loss, row.val_macro_f1);
    out += line;
  }
  return out;
}

void write_metrics_csv(std::span<const EpochLog> log, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << metrics_csv(log);
}

} // namespace kiln::model
