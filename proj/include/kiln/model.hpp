#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kiln/ad.hpp"
#include "kiln/graph.hpp"

namespace kiln::model {

enum class Variant {
  ClimateGraph,     ///< learned attention and directional kernel
  IsotropicMean,    ///< alpha = 1/deg, K = 1
  UniformAttention, ///< alpha = 1/deg, learned K
};

enum class ClassWeightMode { Uniform, InverseFrequency };

std::string to_string(Variant v);
Variant parse_variant(const std::string &s);
std::string to_string(ClassWeightMode m);
ClassWeightMode parse_class_weight_mode(const std::string &s);

struct TrainConfig {
  Variant variant = Variant::ClimateGraph;
  std::size_t layers = 2;
  std::size_t hidden_dim = 32;
  std::size_t harmonics = 4;
  double learning_rate = 1e-3;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;
  ClassWeightMode class_weight_mode = ClassWeightMode::InverseFrequency;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  double leaky_slope = 0.2;
  int num_classes = 2;
  /// Append a constant-1 input channel after standardization.
  bool input_bias = true;

  /// Throws InvalidArgument on an inconsistent configuration.
  void validate() const;
};

struct LayerParams {
  ad::Param W0, Wn, Wh, a, kappa, mu;
};

struct Params {
  std::vector<LayerParams> layers;
  ad::Param Wc, bc;

  std::vector<ad::Param *> all();
  std::vector<const ad::Param *> all() const;
};

/// Seeded initialization: weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// kappa = (1, 0.1 U[0,1), ...), mu = 0, bc = 0.
Params init_params(const TrainConfig &config, std::size_t input_dim);

/// K(theta) = sum_l kappa_l cos(l theta - mu_l).
double kernel_eval(double theta, std::span<const double> kappa, std::span<const double> mu);

/// LeakyReLU(a . [Wh h_i | Wh h_j | phi]) for one edge, Wh stored [D x F].
double attention_logit(std::span<const double> h_i, std::span<const double> h_j,
                       std::span<const double> phi, const ad::Param &Wh, const ad::Param &a,
                       double slope = 0.2);

/// Per-edge geometry terms. distance is already divided by the scale and
/// clipped to [0, 2].
struct EdgeGeometry {
  std::vector<double> distance, sin, cos, theta;
};

EdgeGeometry edge_geometry(const graph::SpatialGraph &g, double distance_scale);

/// 95th percentile (nearest rank) of the distances of edges leaving nodes in
/// `nodes`; 1 when that is zero or no edge qualifies.
double distance_scale(const graph::SpatialGraph &g, std::span<const std::size_t> nodes);

/// Everything the forward pass reads from a graph.
struct GraphInputs {
  std::size_t num_nodes = 0;
  std::size_t feature_dim = 0;
  std::vector<double> features; ///< num_nodes x feature_dim
  std::vector<std::size_t> src, dst;
  EdgeGeometry geometry;
  std::vector<double> inv_degree; ///< per edge, 1 / out-degree of src
};

/// Expects features already standardized. Appends the bias channel when the
/// config asks for it.
GraphInputs make_inputs(const graph::SpatialGraph &g, double distance_scale,
                        const TrainConfig &config);

struct LayerTensors {
  ad::Tensor W0, Wn, Wh, a, kappa, mu;
};

LayerTensors bind(ad::Tape &tape, LayerParams &p);
LayerTensors bind_constant(ad::Tape &tape, const LayerParams &p);

/// One update of every node's state. `activate` selects LeakyReLU over the
/// identity. When `alpha_out` is set it receives the per-edge coefficients.
ad::Tensor layer_forward(ad::Tape &tape, const ad::Tensor &H, const GraphInputs &in,
                         const LayerTensors &p, Variant variant, bool activate, double slope,
                         ad::Tensor *alpha_out = nullptr);

/// Stacked layers then the affine classifier; returns N x C logits.
ad::Tensor forward(ad::Tape &tape, const GraphInputs &in, Params &params, const TrainConfig &config,
                   std::vector<ad::Tensor> *alphas = nullptr);

/// Gradient-free forward pass.
std::vector<double> forward_values(const GraphInputs &in, const Params &params,
                                   const TrainConfig &config);

/// The full training objective on `mask`, used by training and gradcheck.
ad::Tensor loss(ad::Tape &tape, const GraphInputs &in, Params &params, const TrainConfig &config,
                std::span<const int> labels, std::span<const double> class_weights,
                std::span<const std::size_t> mask);

/// Uniform: all 1. Inverse frequency: w_c = |mask| / (C * count_c).
std::vector<double> class_weights(std::span<const int> labels, std::span<const std::size_t> mask,
                                  int num_classes, ClassWeightMode mode);

struct Split {
  std::vector<std::size_t> train, val, test;
};

/// Per class, a seeded shuffle of the labeled nodes (label >= 0) cut by the
/// configured fractions. Each split is returned in ascending node order.
Split stratified_split(std::span<const int> labels, const TrainConfig &config);

/// Node labels with -1 for unlabeled nodes.
std::vector<int> labels_of(const graph::SpatialGraph &g);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_macro_f1 = 0.0;
};

struct Checkpoint {
  TrainConfig config;
  graph::FeatureStats feature_stats;
  double distance_scale = 1.0;
  Split split;
  Params params;
  std::size_t epoch = 0;
  double val_macro_f1 = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  double test_macro_f1 = 0.0;
};

/// Adam on the weighted cross-entropy of the training split. Epoch e logs the
/// parameters after e - 1 updates; the best validation macro-F1 wins, earlier
/// epochs on ties.
TrainResult train(const graph::SpatialGraph &g, const TrainConfig &config);
TrainResult baseline_isotropic_mean(const graph::SpatialGraph &g, TrainConfig config);
TrainResult baseline_uniform_attention(const graph::SpatialGraph &g, TrainConfig config);

struct Prediction {
  std::size_t num_classes = 0;
  std::vector<int> label;
  std::vector<double> probability; ///< N x C
};

/// Row softmax and argmax, ties to the lowest class.
Prediction predict_from_logits(std::span<const double> logits, std::size_t num_classes);

Prediction predict(const graph::SpatialGraph &g, const Checkpoint &checkpoint);

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
};

/// Central differences against backward on the full weighted loss of a seeded
/// random graph (`nodes` nodes, 3 features, both classes, random kappa/mu).
GradcheckResult gradient_check(const TrainConfig &config, std::size_t nodes = 12, std::size_t k = 4,
                               double eps = 1e-5);

} // namespace kiln::model
