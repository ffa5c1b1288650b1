#include "kiln/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kiln/error.hpp"
#include "kiln/metrics.hpp"
#include "kiln/rng.hpp"

namespace kiln::model {

std::string to_string(Variant v) {
  switch (v) {
  case Variant::ClimateGraph:
    return "climategraph";
  case Variant::IsotropicMean:
    return "isotropic_mean";
  case Variant::UniformAttention:
    return "uniform_attention";
  }
  return "climategraph";
}

Variant parse_variant(const std::string &s) {
  if (s == "climategraph") return Variant::ClimateGraph;
  if (s == "isotropic_mean") return Variant::IsotropicMean;
  if (s == "uniform_attention") return Variant::UniformAttention;
  throw Error(ErrorCode::InvalidArgument, "unknown model variant '" + s + "'");
}

std::string to_string(ClassWeightMode m) {
  return m == ClassWeightMode::Uniform ? "uniform" : "inverse_frequency";
}

ClassWeightMode parse_class_weight_mode(const std::string &s) {
  if (s == "uniform") return ClassWeightMode::Uniform;
  if (s == "inverse_frequency") return ClassWeightMode::InverseFrequency;
  throw Error(ErrorCode::InvalidArgument, "unknown class weight mode '" + s + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string &msg) { throw Error(ErrorCode::InvalidArgument, msg); };
  if (layers < 1) fail("layers must be >= 1");
  if (hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (harmonics < 1) fail("harmonics must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (train_fraction <= 0.0 || val_fraction < 0.0 || test_fraction < 0.0) {
    fail("split fractions must be non-negative with a positive train fraction");
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    fail("split fractions must sum to 1");
  }
  if (!(leaky_slope >= 0.0)) fail("leaky_slope must be >= 0");
}

std::vector<ad::Param *> Params::all() {
  std::vector<ad::Param *> out;
  for (auto &l : layers) {
    for (auto *p : {&l.W0, &l.Wn, &l.Wh, &l.a, &l.kappa, &l.mu}) out.push_back(p);
  }
  out.push_back(&Wc);
  out.push_back(&bc);
  return out;
}

std::vector<const ad::Param *> Params::all() const {
  auto mut = const_cast<Params *>(this)->all();
  return {mut.begin(), mut.end()};
}

namespace {

void fill_uniform(ad::Param &p, Rng &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.cols));
  for (auto &v : p.value) v = rng.uniform(-bound, bound);
}

} // namespace

Params init_params(const TrainConfig &config, std::size_t input_dim) {
  Rng rng(config.seed);
  Params params;
  const std::size_t D = config.hidden_dim;
  const std::size_t L = config.harmonics;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    LayerParams lp{ad::Param(prefix + "W0", D, in), ad::Param(prefix + "Wn", D, in),
                   ad::Param(prefix + "Wh", D, in), ad::Param(prefix + "a", 1, 2 * D + 3),
                   ad::Param(prefix + "kappa", 1, L), ad::Param(prefix + "mu", 1, L)};
    fill_uniform(lp.W0, rng);
    fill_uniform(lp.Wn, rng);
    fill_uniform(lp.Wh, rng);
    fill_uniform(lp.a, rng);
    lp.kappa.value[0] = 1.0;
    for (std::size_t h = 1; h < L; ++h) lp.kappa.value[h] = 0.1 * rng.uniform();
    params.layers.push_back(std::move(lp));
    in = D;
  }
  params.Wc = ad::Param("Wc", static_cast<std::size_t>(config.num_classes), in);
  fill_uniform(params.Wc, rng);
  params.bc = ad::Param("bc", 1, static_cast<std::size_t>(config.num_classes));
  return params;
}

double kernel_eval(double theta, std::span<const double> kappa, std::span<const double> mu) {
  if (kappa.empty() || kappa.size() != mu.size()) {
    throw Error(ErrorCode::ShapeMismatch, "kernel needs L >= 1 matching kappa and mu");
  }
  double k = 0.0;
  for (std::size_t l = 0; l < kappa.size(); ++l) {
    k += kappa[l] * std::cos(static_cast<double>(l) * theta - mu[l]);
  }
  return k;
}

double attention_logit(std::span<const double> h_i, std::span<const double> h_j,
                       std::span<const double> phi, const ad::Param &Wh, const ad::Param &a,
                       double slope) {
  const std::size_t D = Wh.rows, F = Wh.cols;
  if (h_i.size() != F || h_j.size() != F || phi.size() != 3 || a.value.size() != 2 * D + 3) {
    throw Error(ErrorCode::ShapeMismatch, "attention_logit: a must have 2 * rows(Wh) + 3 entries");
  }
  double e = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    double zi = 0.0, zj = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      zi += Wh(d, f) * h_i[f];
      zj += Wh(d, f) * h_j[f];
    }
    e += a.value[d] * zi + a.value[D + d] * zj;
  }
  for (std::size_t t = 0; t < 3; ++t) e += a.value[2 * D + t] * phi[t];
  return e > 0.0 ? e : slope * e;
}

EdgeGeometry edge_geometry(const graph::SpatialGraph &g, double scale) {
  EdgeGeometry geom;
  const std::size_t E = g.edges.size();
  geom.distance.resize(E);
  geom.sin.resize(E);
  geom.cos.resize(E);
  geom.theta.resize(E);
  for (std::size_t e = 0; e < E; ++e) {
    const auto &edge = g.edges[e];
    geom.distance[e] = std::clamp(edge.distance_m / scale, 0.0, 2.0);
    geom.theta[e] = edge.bearing_rad;
    geom.sin[e] = std::sin(edge.bearing_rad);
    geom.cos[e] = std::cos(edge.bearing_rad);
  }
  return geom;
}

double distance_scale(const graph::SpatialGraph &g, std::span<const std::size_t> nodes) {
  std::vector<bool> use(g.nodes.size(), false);
  for (auto i : nodes) use.at(i) = true;
  std::vector<double> d;
  for (const auto &e : g.edges) {
    if (use[e.src]) d.push_back(e.distance_m);
  }
  if (d.empty()) return 1.0;
  const auto n = d.size();
  auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(rank - 1), d.end());
  const double p95 = d[rank - 1];
  return p95 > 0.0 ? p95 : 1.0;
}

GraphInputs make_inputs(const graph::SpatialGraph &g, double scale, const TrainConfig &config) {
  GraphInputs in;
  in.num_nodes = g.nodes.size();
  const std::size_t F = g.feature_count();
  in.feature_dim = F + (config.input_bias ? 1 : 0);
  in.features.reserve(in.num_nodes * in.feature_dim);
  for (const auto &node : g.nodes) {
    if (node.features.size() != F) {
      throw Error(ErrorCode::ShapeMismatch, "node " + std::to_string(node.id) +
                                                " has a feature vector of the wrong length");
    }
    in.features.insert(in.features.end(), node.features.begin(), node.features.end());
    if (config.input_bias) in.features.push_back(1.0);
  }
  std::vector<std::size_t> degree(in.num_nodes, 0);
  for (const auto &e : g.edges) {
    in.src.push_back(e.src);
    in.dst.push_back(e.dst);
    ++degree.at(e.src);
  }
  for (auto s : in.src) in.inv_degree.push_back(1.0 / static_cast<double>(degree[s]));
  in.geometry = edge_geometry(g, scale);
  return in;
}

LayerTensors bind(ad::Tape &tape, LayerParams &p) {
  return {tape.param(p.W0), tape.param(p.Wn),    tape.param(p.Wh),
          tape.param(p.a),  tape.param(p.kappa), tape.param(p.mu)};
}

LayerTensors bind_constant(ad::Tape &tape, const LayerParams &p) {
  auto c = [&](const ad::Param &q) { return tape.constant(q.rows, q.cols, q.value); };
  return {c(p.W0), c(p.Wn), c(p.Wh), c(p.a), c(p.kappa), c(p.mu)};
}

ad::Tensor layer_forward(ad::Tape &tape, const ad::Tensor &H, const GraphInputs &in,
                         const LayerTensors &p, Variant variant, bool activate, double slope,
                         ad::Tensor *alpha_out) {
  using namespace kiln::ad;
  const std::size_t N = in.num_nodes;
  const std::size_t E = in.src.size();
  if (H.rows() != N) throw Error(ErrorCode::ShapeMismatch, "H must have one row per node");

  Tensor alpha;
  if (variant == Variant::ClimateGraph) {
    const std::size_t D = p.Wh.rows();
    if (p.a.cols() != 2 * D + 3) {
      throw Error(ErrorCode::ShapeMismatch, "attention vector must have 2 * rows(Wh) + 3 entries");
    }
    const Tensor z = matmul_nt(H, p.Wh);
    const Tensor s_self = matmul_nt(z, slice_cols(p.a, 0, D));
    const Tensor s_nbr = matmul_nt(z, slice_cols(p.a, D, D));
    std::vector<double> phi(E * 3);
    for (std::size_t e = 0; e < E; ++e) {
      phi[e * 3 + 0] = in.geometry.distance[e];
      phi[e * 3 + 1] = in.geometry.sin[e];
      phi[e * 3 + 2] = in.geometry.cos[e];
    }
    const Tensor geo_term = matmul_nt(tape.constant(E, 3, std::move(phi)), slice_cols(p.a, 2 * D, 3));
    const Tensor logits =
        leaky_relu(add(add(gather_rows(s_self, in.src), gather_rows(s_nbr, in.dst)), geo_term), slope);
    alpha = segment_softmax(logits, in.src, N);
  } else {
    alpha = tape.constant(E, 1, in.inv_degree);
  }
  if (alpha_out) *alpha_out = alpha;

  Tensor coef = alpha;
  if (variant != Variant::IsotropicMean) {
    const Tensor theta = tape.constant(E, 1, in.geometry.theta);
    const std::size_t L = p.kappa.cols();
    if (L < 1 || p.mu.cols() != L) throw Error(ErrorCode::ShapeMismatch, "kappa and mu must match");
    Tensor K = mul(cos_shifted(theta, 0, element(p.mu, 0, 0)), element(p.kappa, 0, 0));
    for (std::size_t l = 1; l < L; ++l) {
      K = add(K, mul(cos_shifted(theta, static_cast<int>(l), element(p.mu, 0, l)),
                     element(p.kappa, 0, l)));
    }
    coef = mul(alpha, K);
  }

  const Tensor messages = gather_rows(matmul_nt(H, p.Wn), in.dst);
  const Tensor aggregated = scatter_add_rows(scale_rows(messages, coef), in.src, N);
  const Tensor out = add(matmul_nt(H, p.W0), aggregated);
  return activate ? leaky_relu(out, slope) : out;
}

namespace {

ad::Tensor forward_bound(ad::Tape &tape, const GraphInputs &in, const std::vector<LayerTensors> &layers,
                         const ad::Tensor &Wc, const ad::Tensor &bc, const TrainConfig &config,
                         std::vector<ad::Tensor> *alphas) {
  ad::Tensor H = tape.constant(in.num_nodes, in.feature_dim, in.features);
  for (const auto &lt : layers) {
    ad::Tensor alpha;
    H = layer_forward(tape, H, in, lt, config.variant, true, config.leaky_slope, &alpha);
    if (alphas) alphas->push_back(alpha);
  }
  return ad::add(ad::matmul_nt(H, Wc), bc);
}

} // namespace

ad::Tensor forward(ad::Tape &tape, const GraphInputs &in, Params &params, const TrainConfig &config,
                   std::vector<ad::Tensor> *alphas) {
  std::vector<LayerTensors> layers;
  for (auto &lp : params.layers) layers.push_back(bind(tape, lp));
  return forward_bound(tape, in, layers, tape.param(params.Wc), tape.param(params.bc), config,
                       alphas);
}

std::vector<double> forward_values(const GraphInputs &in, const Params &params,
                                   const TrainConfig &config) {
  ad::Tape tape;
  std::vector<LayerTensors> layers;
  for (const auto &lp : params.layers) layers.push_back(bind_constant(tape, lp));
  const auto &Wc = params.Wc, &bc = params.bc;
  const auto logits = forward_bound(tape, in, layers, tape.constant(Wc.rows, Wc.cols, Wc.value),
                                    tape.constant(bc.rows, bc.cols, bc.value), config, nullptr);
  return {logits.values().begin(), logits.values().end()};
}

ad::Tensor loss(ad::Tape &tape, const GraphInputs &in, Params &params, const TrainConfig &config,
                std::span<const int> labels, std::span<const double> weights,
                std::span<const std::size_t> mask) {
  return ad::weighted_cross_entropy(forward(tape, in, params, config), labels, weights, mask);
}

std::vector<double> class_weights(std::span<const int> labels, std::span<const std::size_t> mask,
                                  int num_classes, ClassWeightMode mode) {
  const auto C = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> count(C, 0);
  for (auto i : mask) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) {
      throw Error(ErrorCode::InvalidArgument, "label out of range at node " + std::to_string(i));
    }
    ++count[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (count[c] == 0) {
      throw Error(ErrorCode::MissingClass, "class " + std::to_string(c) + " has no labeled nodes");
    }
  }
  std::vector<double> w(C, 1.0);
  if (mode == ClassWeightMode::InverseFrequency) {
    for (std::size_t c = 0; c < C; ++c) {
      w[c] = static_cast<double>(mask.size()) / (static_cast<double>(C) * static_cast<double>(count[c]));
    }
  }
  return w;
}

Split stratified_split(std::span<const int> labels, const TrainConfig &config) {
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  Split split;
  int max_label = -1;
  for (int y : labels) max_label = std::max(max_label, y);
  for (int c = 0; c <= max_label; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(members));
    const double n = static_cast<double>(members.size());
    const auto n_train = std::min(members.size(), static_cast<std::size_t>(std::llround(n * config.train_fraction)));
    const auto n_val =
        std::min(members.size() - n_train, static_cast<std::size_t>(std::llround(n * config.val_fraction)));
    for (std::size_t m = 0; m < members.size(); ++m) {
      auto &dest = m < n_train ? split.train : m < n_train + n_val ? split.val : split.test;
      dest.push_back(members[m]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<int> labels_of(const graph::SpatialGraph &g) {
  std::vector<int> labels;
  labels.reserve(g.nodes.size());
  for (const auto &n : g.nodes) labels.push_back(n.label ? *n.label : -1);
  return labels;
}

namespace {

double cross_entropy_value(std::span<const double> logits, std::size_t C, std::span<const int> labels,
                           std::span<const double> w, std::span<const std::size_t> mask) {
  if (mask.empty()) return 0.0;
  double total = 0.0;
  for (auto i : mask) {
    const double *z = &logits[i * C];
    const double zmax = *std::max_element(z, z + C);
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += std::exp(z[c] - zmax);
    const auto y = static_cast<std::size_t>(labels[i]);
    total -= w[y] * (z[y] - zmax - std::log(s));
  }
  return total / static_cast<double>(mask.size());
}

double macro_f1_on(std::span<const double> logits, std::size_t C, std::span<const int> labels,
                   std::span<const std::size_t> mask) {
  if (mask.empty()) return 0.0;
  const auto pred = predict_from_logits(logits, C);
  std::vector<int> p, t;
  for (auto i : mask) {
    p.push_back(pred.label[i]);
    t.push_back(labels[i]);
  }
  return eval::node_classification_report(p, t, static_cast<int>(C)).macro_f1;
}

struct Adam {
  explicit Adam(double lr) : lr(lr) {}

  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t t = 0;
  std::vector<std::vector<double>> m, v;

  void step(const std::vector<ad::Param *> &params) {
    if (m.empty()) {
      for (auto *p : params) {
        m.emplace_back(p->value.size(), 0.0);
        v.emplace_back(p->value.size(), 0.0);
      }
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto &p = *params[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        m[k][i] = beta1 * m[k][i] + (1.0 - beta1) * g;
        v[k][i] = beta2 * v[k][i] + (1.0 - beta2) * g * g;
        p.value[i] -= lr * (m[k][i] / c1) / (std::sqrt(v[k][i] / c2) + eps);
      }
    }
  }
};

} // namespace

TrainResult train(const graph::SpatialGraph &g, const TrainConfig &config) {
  config.validate();
  const auto C = static_cast<std::size_t>(config.num_classes);
  const auto labels = labels_of(g);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= config.num_classes) {
      throw Error(ErrorCode::InvalidArgument, "node " + std::to_string(g.nodes[i].id) +
                                                  " has a label >= num_classes");
    }
  }
  const Split split = stratified_split(labels, config);
  if (split.train.empty()) throw Error(ErrorCode::EmptyMask, "no labeled training nodes");
  const auto weights = class_weights(labels, split.train, config.num_classes, config.class_weight_mode);

  graph::SpatialGraph work = g;
  std::vector<std::uint8_t> train_mask(g.nodes.size(), 0);
  for (auto i : split.train) train_mask[i] = 1;
  const auto stats = graph::fit_standardization(work, train_mask);
  graph::apply_standardization(work, stats);
  const double scale = distance_scale(work, split.train);
  const GraphInputs in = make_inputs(work, scale, config);

  TrainResult result;
  auto &ck = result.checkpoint;
  ck.config = config;
  ck.feature_stats = stats;
  ck.distance_scale = scale;
  ck.split = split;
  ck.params = init_params(config, in.feature_dim);
  Params params = ck.params;
  const auto handles = params.all();
  Adam adam(config.learning_rate);
  double best = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    ad::Tape tape;
    ad::Tensor objective, logits;
    try {
      logits = forward(tape, in, params, config);
      objective = ad::weighted_cross_entropy(logits, labels, weights, split.train);
    } catch (const Error &e) {
      if (e.code() != ErrorCode::NumericalError) throw;
      throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": " + e.what());
    }
    const double train_loss = objective.value();
    if (!std::isfinite(train_loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch));
    }
    const auto z = logits.values();
    EpochLog row{epoch, train_loss, cross_entropy_value(z, C, labels, weights, split.val),
                 macro_f1_on(z, C, labels, split.val)};
    result.log.push_back(row);
    if (row.val_macro_f1 > best) {
      best = row.val_macro_f1;
      ck.params = params;
      ck.epoch = epoch;
      ck.val_macro_f1 = row.val_macro_f1;
    }
    try {
      tape.backward(objective);
    } catch (const Error &e) {
      if (e.code() != ErrorCode::NumericalError) throw;
      throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": " + e.what());
    }
    adam.step(handles);
    for (auto *p : handles) p->zero_grad();
  }

  for (auto *p : ck.params.all()) p->zero_grad();
  const auto test_logits = forward_values(in, ck.params, config);
  result.test_macro_f1 = macro_f1_on(test_logits, C, labels, split.test);
  return result;
}

TrainResult baseline_isotropic_mean(const graph::SpatialGraph &g, TrainConfig config) {
  config.variant = Variant::IsotropicMean;
  return train(g, config);
}

TrainResult baseline_uniform_attention(const graph::SpatialGraph &g, TrainConfig config) {
  config.variant = Variant::UniformAttention;
  return train(g, config);
}

Prediction predict_from_logits(std::span<const double> logits, std::size_t C) {
  if (C == 0 || logits.size() % C != 0) {
    throw Error(ErrorCode::ShapeMismatch, "logit count is not a multiple of the class count");
  }
  Prediction out;
  out.num_classes = C;
  const std::size_t N = logits.size() / C;
  out.label.resize(N);
  out.probability.resize(logits.size());
  for (std::size_t i = 0; i < N; ++i) {
    const double *z = &logits[i * C];
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c) {
      if (z[c] > z[best]) best = c;
    }
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      out.probability[i * C + c] = std::exp(z[c] - z[best]);
      s += out.probability[i * C + c];
    }
    for (std::size_t c = 0; c < C; ++c) out.probability[i * C + c] /= s;
    out.label[i] = static_cast<int>(best);
  }
  return out;
}

Prediction predict(const graph::SpatialGraph &g, const Checkpoint &ck) {
  graph::SpatialGraph work = g;
  graph::apply_standardization(work, ck.feature_stats);
  const GraphInputs in = make_inputs(work, ck.distance_scale, ck.config);
  return predict_from_logits(forward_values(in, ck.params, ck.config),
                             static_cast<std::size_t>(ck.config.num_classes));
}

GradcheckResult gradient_check(const TrainConfig &config, std::size_t nodes, std::size_t k,
                               double eps) {
  config.validate();
  Rng rng(config.seed);
  std::vector<graph::PoiNode> poi(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    poi[i].id = static_cast<std::int64_t>(i);
    poi[i].location = geo::make_point(74.0 + rng.uniform(0.0, 0.01), 31.0 + rng.uniform(0.0, 0.01));
    for (int f = 0; f < 3; ++f) poi[i].features.push_back(rng.normal());
    poi[i].missing.assign(3, false);
    poi[i].label = static_cast<int>(i % static_cast<std::size_t>(config.num_classes));
  }
  graph::SpatialGraph g = graph::knn_edges(std::move(poi), k);
  g.feature_names = {"f_0", "f_1", "f_2"};

  std::vector<std::size_t> all(nodes);
  for (std::size_t i = 0; i < nodes; ++i) all[i] = i;
  const GraphInputs in = make_inputs(g, distance_scale(g, all), config);
  const auto labels = labels_of(g);
  const auto weights = class_weights(labels, all, config.num_classes, config.class_weight_mode);

  Params params = init_params(config, in.feature_dim);
  for (auto &layer : params.layers) {
    for (auto &v : layer.kappa.value) v = rng.uniform(-1.0, 1.0);
    for (auto &v : layer.mu.value) v = rng.uniform(-std::numbers::pi, std::numbers::pi);
  }
  for (auto &v : params.bc.value) v = rng.uniform(-0.5, 0.5);

  const auto handles = params.all();
  GradcheckResult out;
  for (const auto *p : handles) out.parameters += p->value.size();
  out.max_relative_error = ad::finite_difference_check(
      [&](ad::Tape &tape) { return loss(tape, in, params, config, labels, weights, all); }, handles,
      eps);
  return out;
}

} // namespace kiln::model
