#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's numerical kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "hcm/hcm.hpp"

namespace hcm::testing {

/// Erdos-Renyi style edge list, each pair kept with probability p.
inline std::vector<Edge> random_edges(std::size_t n, double p, Rng& rng) {
  std::vector<Edge> edges;
  for (NodeId a = 0; a < n; ++a)
    for (NodeId b = a + 1; b < n; ++b)
      if (rng.uniform() < p) edges.push_back({a, b});
  return edges;
}

inline SparseAdjacency random_graph(std::size_t n, double p, Rng& rng) {
  const auto e = random_edges(n, p, rng);
  return build_adjacency(std::span<const Edge>(e), n);
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

using DenseRows = std::vector<std::vector<double>>;

inline DenseRows dense_adjacency(std::size_t n, const std::vector<Edge>& edges) {
  DenseRows a(n, std::vector<double>(n, 0.0));
  for (const Edge& e : edges)
    if (e.u != e.v) a[e.u][e.v] = a[e.v][e.u] = 1.0;
  return a;
}

/// D^-1/2 (A + I) D^-1/2 computed densely from the definition.
inline DenseRows dense_propagator(std::size_t n, const std::vector<Edge>& edges) {
  DenseRows a = dense_adjacency(n, edges);
  for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] /= std::sqrt(deg[i] * deg[j]);
  return a;
}

inline DenseRows dense_product(const DenseRows& a, const Matrix& b) {
  DenseRows out(a.size(), std::vector<double>(b.cols(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < b.rows(); ++k) out[i][j] += a[i][k] * b(k, j);
  return out;
}

inline constexpr std::uint32_t kInf = std::numeric_limits<std::uint32_t>::max();

/// All-pairs hop distances; kInf when unreachable.
inline std::vector<std::vector<std::uint32_t>> floyd_warshall(std::size_t n,
                                                              const std::vector<Edge>& edges) {
  std::vector<std::vector<std::uint64_t>> d(n, std::vector<std::uint64_t>(n, kInf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const Edge& e : edges)
    if (e.u != e.v) d[e.u][e.v] = d[e.v][e.u] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  std::vector<std::vector<std::uint32_t>> out(n, std::vector<std::uint32_t>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i][j] = d[i][j] >= kInf ? kInf : static_cast<std::uint32_t>(d[i][j]);
  return out;
}

/// Area under the ROC curve by comparing every positive/negative pair; ties count 1/2.
/// Kept in integer half-units so the result is exact before the final division.
inline double brute_force_auc(const std::vector<double>& scores,
                              const std::vector<std::uint8_t>& labels) {
  std::uint64_t half_wins = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) half_wins += 2;
      else if (scores[i] == scores[j]) half_wins += 1;
    }
  }
  return static_cast<double>(half_wins) / 2.0 / static_cast<double>(pairs);
}

/// Mean cross-entropy evaluated in long double.
inline long double reference_cross_entropy(const Matrix& logits,
                                           const std::vector<std::uint32_t>& labels) {
  long double total = 0.0L;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    long double mx = logits(r, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max<long double>(mx, logits(r, c));
    long double z = 0.0L;
    for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(static_cast<long double>(logits(r, c)) - mx);
    total += mx + std::log(z) - static_cast<long double>(logits(r, labels[r]));
  }
  return total / static_cast<long double>(logits.rows());
}

/// Guarded relative error used for gradient checks.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

/// A small random model and batch for gradient checking.
struct GradientProblem {
  AttributedNetwork net;
  SparseAdjacency adj;
  NormalizedPropagator prop;
  ModelParams params;
  std::vector<Edge> pairs;
  std::vector<std::uint32_t> labels;
};

/// Distance of the forward pass from the nearest nondifferentiable point: the
/// smallest |pre-activation| feeding a ReLU and the smallest nonzero |Z_m - Z_n|.
inline double kink_margin(const GradientProblem& g) {
  ForwardCache c;
  forward_loss(g.params, g.prop, g.net.attributes, g.pairs, g.labels, c);
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& m : c.preact)
    for (double v : m.values()) margin = std::min(margin, std::abs(v));
  for (std::size_t k = 0; k + 1 < c.mlp_preact.size(); ++k)
    for (double v : c.mlp_preact[k].values()) margin = std::min(margin, std::abs(v));
  const Matrix& z = c.embeddings();
  for (const Edge& e : g.pairs)
    for (std::size_t j = 0; j < z.cols(); ++j) {
      const double d = std::abs(z(e.u, j) - z(e.v, j));
      if (d > 0.0) margin = std::min(margin, d);
    }
  return margin;
}

/// Central differences only estimate the gradient where the loss is smooth
/// within +-h, so instances with an activation this close to a kink are redrawn.
inline constexpr double kMinKinkMargin = 1e-3;

/// A random instance with n in [3, 10] (or exactly `nodes`), d in [1, 6], two
/// GCN layers and C = 4, at least kMinKinkMargin away from every kink.
inline GradientProblem make_gradient_problem(std::uint64_t seed, bool use_bias,
                                             std::size_t nodes = 0) {
  Rng rng(seed);
  while (true) {
    GradientProblem g;
    const std::size_t n = nodes > 0 ? nodes : 3 + rng.index(8);
    const std::size_t d = 1 + rng.index(6);
    g.adj = random_graph(n, 0.4, rng);
    g.prop = normalized_propagator(g.adj);
    g.net.node_count = n;
    g.net.edges = g.adj.edges();
    g.net.attributes = random_matrix(n, d, rng);
    const auto arch = ArchSpec::make(d, 2, 3 + rng.index(4), 3 + rng.index(5), 4, use_bias);
    g.params = init_params(arch, rng);
    // Spread biases away from zero so they matter.
    g.params.for_each_layer([&](DenseLayer& l) {
      for (double& b : l.bias) b = rng.uniform(-0.3, 0.3);
    });
    const std::size_t batch = 4 + rng.index(12);
    for (std::size_t i = 0; i < batch; ++i) {
      const auto a = static_cast<NodeId>(rng.index(n));
      auto b = static_cast<NodeId>(rng.index(n - 1));
      if (b >= a) ++b;
      g.pairs.push_back({a, b});
      g.labels.push_back(static_cast<std::uint32_t>(rng.index(4)));
    }
    if (kink_margin(g) >= kMinKinkMargin) return g;
  }
}

/// Largest relative error between backward() and central differences at step h.
inline double max_gradient_error(GradientProblem& g, double h = 1e-4) {
  ForwardCache cache;
  forward_loss(g.params, g.prop, g.net.attributes, g.pairs, g.labels, cache);
  const Gradients grads = backward(cache, g.labels, g.params, g.prop);

  double worst = 0.0;
  auto check = [&](std::vector<double>& weights, const std::vector<double>& analytic) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double saved = weights[i];
      ForwardCache scratch;
      weights[i] = saved + h;
      const double up = forward_loss(g.params, g.prop, g.net.attributes, g.pairs, g.labels, scratch);
      weights[i] = saved - h;
      const double down = forward_loss(g.params, g.prop, g.net.attributes, g.pairs, g.labels, scratch);
      weights[i] = saved;
      worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
    }
  };
  for (std::size_t l = 0; l < g.params.gcn.size(); ++l) {
    check(g.params.gcn[l].weight.values(), grads.gcn[l].weight.values());
    check(g.params.gcn[l].bias, grads.gcn[l].bias);
  }
  for (std::size_t l = 0; l < g.params.mlp.size(); ++l) {
    check(g.params.mlp[l].weight.values(), grads.mlp[l].weight.values());
    check(g.params.mlp[l].bias, grads.mlp[l].bias);
  }
  return worst;
}

}  // namespace hcm::testing
