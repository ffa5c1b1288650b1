#pragma once

// Plain-loop forward pass and graph fixtures for the model tests. The oracle
// reads the graph and parameters directly, without the tape or make_inputs.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "kiln/graph.hpp"
#include "kiln/model.hpp"
#include "kiln/rng.hpp"

namespace oracle {

/// Random POIs in a 0.2 degree window with F normal features and labels
/// i mod C, linked by k-NN.
inline kiln::graph::SpatialGraph random_graph(std::uint64_t seed, std::size_t n, std::size_t k, std::size_t f,
                                              int classes = 2) {
  kiln::Rng rng(seed);
  std::vector<kiln::graph::PoiNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto &node = nodes[i];
    node.id = static_cast<std::int64_t>(i);
    node.location = {74.0 + rng.uniform(0.0, 0.2), 31.0 + rng.uniform(0.0, 0.2)};
    for (std::size_t j = 0; j < f; ++j) node.features.push_back(rng.normal());
    node.missing.assign(f, false);
    node.label = static_cast<int>(i % static_cast<std::size_t>(classes));
  }
  auto g = kiln::graph::knn_edges(std::move(nodes), k);
  for (std::size_t j = 0; j < f; ++j) g.feature_names.push_back("f" + std::to_string(j));
  return g;
}

/// Parameters drawn away from the defaults so that every term matters.
inline void randomize(kiln::model::Params &p, std::uint64_t seed) {
  kiln::Rng rng(seed);
  for (auto *q : p.all()) {
    for (auto &v : q->value) v = rng.uniform(-0.8, 0.8);
  }
}

inline double lrelu(double x, double slope) { return x > 0 ? x : slope * x; }

/// y = W x for W stored [out x in].
inline std::vector<double> apply(const kiln::ad::Param &W, const double *x) {
  std::vector<double> y(W.rows, 0.0);
  for (std::size_t r = 0; r < W.rows; ++r)
    for (std::size_t c = 0; c < W.cols; ++c) y[r] += W(r, c) * x[c];
  return y;
}

struct OracleOutput {
  std::vector<double> logits;             ///< N x C
  std::vector<std::vector<double>> alpha; ///< per layer, per edge
};

/// h_i' = act(W0 h_i + sum_j alpha_ij K(theta_ij) Wn h_j) per layer, then
/// Wc h + bc. Features are used as stored on the nodes, plus the bias column.
inline OracleOutput forward(const kiln::graph::SpatialGraph &g, const kiln::model::Params &params,
                            const kiln::model::TrainConfig &cfg, double scale) {
  using kiln::model::Variant;
  const std::size_t N = g.nodes.size();
  std::vector<std::vector<double>> H(N);
  for (std::size_t i = 0; i < N; ++i) {
    H[i] = g.nodes[i].features;
    if (cfg.input_bias) H[i].push_back(1.0);
  }
  std::vector<std::size_t> deg(N, 0);
  for (const auto &e : g.edges) ++deg[e.src];

  OracleOutput out;
  for (const auto &lp : params.layers) {
    const std::size_t D = lp.W0.rows;
    std::vector<double> alpha(g.edges.size());
    if (cfg.variant == Variant::ClimateGraph) {
      std::vector<double> logit(g.edges.size());
      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto &edge = g.edges[e];
        const auto zi = apply(lp.Wh, H[edge.src].data());
        const auto zj = apply(lp.Wh, H[edge.dst].data());
        const double phi[3] = {std::clamp(edge.distance_m / scale, 0.0, 2.0), std::sin(edge.bearing_rad),
                               std::cos(edge.bearing_rad)};
        double s = 0.0;
        for (std::size_t d = 0; d < D; ++d) s += lp.a.value[d] * zi[d] + lp.a.value[D + d] * zj[d];
        for (int t = 0; t < 3; ++t) s += lp.a.value[2 * D + std::size_t(t)] * phi[t];
        logit[e] = lrelu(s, cfg.leaky_slope);
      }
      for (std::size_t i = 0; i < N; ++i) {
        double m = -1e300, z = 0.0;
        for (std::size_t e = 0; e < g.edges.size(); ++e)
          if (g.edges[e].src == i) m = std::max(m, logit[e]);
        for (std::size_t e = 0; e < g.edges.size(); ++e)
          if (g.edges[e].src == i) z += std::exp(logit[e] - m);
        for (std::size_t e = 0; e < g.edges.size(); ++e)
          if (g.edges[e].src == i) alpha[e] = std::exp(logit[e] - m) / z;
      }
    } else {
      for (std::size_t e = 0; e < g.edges.size(); ++e) alpha[e] = 1.0 / double(deg[g.edges[e].src]);
    }
    out.alpha.push_back(alpha);

    std::vector<std::vector<double>> next(N);
    for (std::size_t i = 0; i < N; ++i) next[i] = apply(lp.W0, H[i].data());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const auto &edge = g.edges[e];
      double K = 1.0;
      if (cfg.variant != Variant::IsotropicMean) {
        K = 0.0;
        for (std::size_t l = 0; l < lp.kappa.cols; ++l)
          K += lp.kappa.value[l] * std::cos(double(l) * edge.bearing_rad - lp.mu.value[l]);
      }
      const auto msg = apply(lp.Wn, H[edge.dst].data());
      for (std::size_t d = 0; d < D; ++d) next[edge.src][d] += alpha[e] * K * msg[d];
    }
    for (auto &h : next)
      for (auto &v : h) v = lrelu(v, cfg.leaky_slope);
    H = std::move(next);
  }
  for (std::size_t i = 0; i < N; ++i) {
    const auto y = apply(params.Wc, H[i].data());
    for (std::size_t c = 0; c < y.size(); ++c) out.logits.push_back(y[c] + params.bc.value[c]);
  }
  return out;
}

/// Graph with node i moved to position perm[i]; edges remapped and re-sorted
/// by (src, distance, neighbor id) as knn_edges would emit them.
inline kiln::graph::SpatialGraph permute(const kiln::graph::SpatialGraph &g, const std::vector<std::size_t> &perm) {
  kiln::graph::SpatialGraph out = g;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) out.nodes[perm[i]] = g.nodes[i];
  for (auto &e : out.edges) {
    e.src = perm[e.src];
    e.dst = perm[e.dst];
  }
  std::stable_sort(out.edges.begin(), out.edges.end(), [](const auto &a, const auto &b) { return a.src < b.src; });
  return out;
}

inline std::vector<std::size_t> random_permutation(kiln::Rng &rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(std::span<std::size_t>(p));
  return p;
}

} // namespace oracle
