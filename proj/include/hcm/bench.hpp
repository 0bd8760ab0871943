#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "hcm/error.hpp"
#include "hcm/graph.hpp"
#include "hcm/matrix.hpp"
#include "hcm/rng.hpp"

namespace hcm {

// ---------------------------------------------------------------------------
// Anomaly injection
// ---------------------------------------------------------------------------

/// Which node of an attribute swap is perturbed and labeled.
enum class AttributeRole {
  mark_farthest,   // X_far <- X_candidate, far node is the anomaly
  mark_candidate,  // X_candidate <- X_far, candidate is the anomaly
};

struct InjectionConfig {
  std::size_t clique_size = 15;   // s
  std::size_t clique_count = 10;  // t
  std::size_t candidate_pool = 50;  // k
  AttributeRole role = AttributeRole::mark_farthest;

  void validate(std::size_t node_count) const {
    detail::require(clique_size >= 2, "clique size s must be >= 2");
    detail::require(clique_count >= 1, "clique count t must be >= 1");
    detail::require(candidate_pool >= 1, "candidate pool k must be >= 1");
    detail::require(clique_size * clique_count <= node_count,
                    "s*t = " + std::to_string(clique_size * clique_count) + " exceeds node count " +
                        std::to_string(node_count));
  }
};

namespace detail {

// First `count` entries of a seeded Fisher-Yates shuffle of [0, n).
inline std::vector<NodeId> distinct_nodes(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<NodeId> pool(n);
  std::iota(pool.begin(), pool.end(), NodeId{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

inline void mark_anomalous(AttributedNetwork& net, std::span<const NodeId> nodes) {
  if (!net.anomaly_flags) net.anomaly_flags.emplace(net.node_count, 0);
  for (NodeId v : nodes) (*net.anomaly_flags)[v] = 1;
}

}  // namespace detail

/// Wires t disjoint random s-node groups into cliques. Returns the s*t anomalies, sorted.
inline std::vector<NodeId> inject_structural(AttributedNetwork& net, const InjectionConfig& config,
                                             Rng& rng) {
  config.validate(net.node_count);
  const std::size_t s = config.clique_size;
  auto chosen = detail::distinct_nodes(net.node_count, s * config.clique_count, rng);
  for (std::size_t c = 0; c < config.clique_count; ++c)
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t b = a + 1; b < s; ++b)
        net.edges.push_back(Edge::canonical(chosen[c * s + a], chosen[c * s + b]));
  net.canonicalize_edges();
  detail::mark_anomalous(net, chosen);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

/// One attribute swap, kept for auditing.
struct AttributeSwap {
  NodeId candidate = 0;
  std::vector<NodeId> sampled;  // the k nodes compared against the candidate
  NodeId farthest = 0;
};

struct AttributeInjection {
  std::vector<NodeId> anomalies;  // sorted, deduplicated
  std::vector<AttributeSwap> swaps;
};

/// For each of s*t distinct candidates, compares against k other random nodes and
/// copies attributes across to the farthest (Euclidean) one, ties to the smaller id.
inline AttributeInjection inject_attribute(AttributedNetwork& net, const InjectionConfig& config,
                                           Rng& rng) {
  config.validate(net.node_count);
  const std::size_t n = net.node_count;
  detail::require(config.candidate_pool < n, "candidate pool k must be smaller than node count");
  Matrix& x = net.attributes;

  AttributeInjection result;
  const auto candidates =
      detail::distinct_nodes(n, config.clique_size * config.clique_count, rng);
  std::vector<NodeId> marked;
  for (NodeId cand : candidates) {
    AttributeSwap swap{cand, {}, 0};
    // k distinct nodes from the n - 1 others.
    for (NodeId v : detail::distinct_nodes(n - 1, config.candidate_pool, rng))
      swap.sampled.push_back(v >= cand ? v + 1 : v);
    double best = -1.0;
    for (NodeId v : swap.sampled) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double diff = x(cand, c) - x(v, c);
        d2 += diff * diff;
      }
      if (d2 > best || (d2 == best && v < swap.farthest)) {
        best = d2;
        swap.farthest = v;
      }
    }
    const NodeId src = config.role == AttributeRole::mark_farthest ? cand : swap.farthest;
    const NodeId dst = config.role == AttributeRole::mark_farthest ? swap.farthest : cand;
    for (std::size_t c = 0; c < x.cols(); ++c) x(dst, c) = x(src, c);
    marked.push_back(dst);
    result.swaps.push_back(std::move(swap));
  }
  std::sort(marked.begin(), marked.end());
  marked.erase(std::unique(marked.begin(), marked.end()), marked.end());
  detail::mark_anomalous(net, marked);
  result.anomalies = std::move(marked);
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic graphs
// ---------------------------------------------------------------------------

/// Stochastic block model with Gaussian attributes around per-block means.
/// Block b has mean separation * e_(b mod d).
struct SyntheticSpec {
  std::size_t block_count = 5;
  std::size_t nodes_per_block = 100;
  double p_in = 0.1;
  double p_out = 0.01;
  std::size_t attribute_dim = 20;
  double mean_separation = 3.0;

  std::size_t node_count() const { return block_count * nodes_per_block; }

  void validate() const {
    detail::require(block_count >= 1 && nodes_per_block >= 1, "SBM needs at least one node");
    detail::require(attribute_dim >= 1, "attribute dimension must be >= 1");
    detail::require(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0,
                    "SBM probabilities must lie in [0, 1]");
    detail::require(p_out <= p_in, "SBM requires p_out <= p_in");
  }
};

inline std::size_t sbm_block(const SyntheticSpec& spec, NodeId v) {
  return v / spec.nodes_per_block;
}

inline AttributedNetwork sbm_generate(const SyntheticSpec& spec, Rng& rng) {
  spec.validate();
  AttributedNetwork net;
  net.node_count = spec.node_count();
  net.attribute_kind = AttributeKind::continuous;
  const auto n = static_cast<NodeId>(net.node_count);
  for (NodeId a = 0; a < n; ++a)
    for (NodeId b = a + 1; b < n; ++b) {
      const double p = sbm_block(spec, a) == sbm_block(spec, b) ? spec.p_in : spec.p_out;
      if (rng.bernoulli(p)) net.edges.push_back({a, b});
    }
  net.attributes = Matrix(net.node_count, spec.attribute_dim);
  for (NodeId v = 0; v < n; ++v) {
    const std::size_t hot = sbm_block(spec, v) % spec.attribute_dim;
    for (std::size_t c = 0; c < spec.attribute_dim; ++c)
      net.attributes(v, c) = (c == hot ? spec.mean_separation : 0.0) + rng.normal();
  }
  return net;
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
};

/// Cyclic Jacobi eigensolver for a symmetric matrix.
inline EigenDecomposition symmetric_eigen(Matrix a, double tolerance = 1e-15,
                                          std::size_t max_sweeps = 100) {
  detail::require(a.rows() == a.cols(), "symmetric_eigen needs a square matrix");
  const std::size_t n = a.rows();
  Matrix v = Matrix::identity(n);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += a(i, i) * a(i, i);
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off <= tolerance * tolerance * diag || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  EigenDecomposition out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = a(order[i], order[i]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, i) = v(k, order[i]);
  }
  return out;
}

struct PcaOptions {
  /// Attribute counts up to this use the dense covariance and a direct solver;
  /// above it, block subspace iteration on the implicit covariance.
  std::size_t direct_limit = 1024;
  std::size_t max_iterations = 1000;
  double tolerance = 1e-13;
  std::uint64_t seed = 0x5eed;
};

struct PcaResult {
  Matrix projected;                       // n x k
  Matrix components;                      // d x k, orthonormal columns
  std::vector<double> explained_variance;  // k eigenvalues of the sample covariance
  std::vector<double> column_means;
};

namespace detail {

inline void orthonormalize_columns(Matrix& v) {
  for (std::size_t j = 0; j < v.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < j; ++i) {
        double dot = 0.0;
        for (std::size_t r = 0; r < v.rows(); ++r) dot += v(r, i) * v(r, j);
        for (std::size_t r = 0; r < v.rows(); ++r) v(r, j) -= dot * v(r, i);
      }
    double norm = 0.0;
    for (std::size_t r = 0; r < v.rows(); ++r) norm += v(r, j) * v(r, j);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t r = 0; r < v.rows(); ++r) v(r, j) /= norm;
  }
}

// Top eigenpairs of Xc^T Xc / (n - 1) without forming the d x d matrix.
inline EigenDecomposition subspace_eigen(const Matrix& centered, std::size_t k,
                                         const PcaOptions& opt) {
  const std::size_t d = centered.cols();
  const std::size_t block = std::min(d, k + 10);
  const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(centered.rows(), 2) - 1);
  Rng rng(opt.seed);
  Matrix v(d, block);
  for (double& x : v.values()) x = rng.normal();
  orthonormalize_columns(v);
  EigenDecomposition ritz;
  std::vector<double> previous(k, 0.0);
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    v = matmul_tn(centered, matmul(centered, v));
    orthonormalize_columns(v);
    const Matrix xv = matmul(centered, v);
    Matrix small = matmul_tn(xv, xv);
    for (double& x : small.values()) x *= scale;
    ritz = symmetric_eigen(small);
    v = matmul(v, ritz.vectors);
    double change = 0.0, size = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      change = std::max(change, std::abs(ritz.values[i] - previous[i]));
      size = std::max(size, std::abs(ritz.values[i]));
      previous[i] = ritz.values[i];
    }
    if (it > 0 && change <= opt.tolerance * std::max(size, 1e-300)) break;
  }
  ritz.vectors = v;
  return ritz;
}

}  // namespace detail

/// Centers the columns and projects onto the top-k principal axes. Each axis is
/// signed so that its largest-magnitude loading is positive.
inline PcaResult pca_fit(const Matrix& x, std::size_t target_dim, const PcaOptions& opt = {}) {
  const std::size_t n = x.rows(), d = x.cols();
  detail::require(target_dim >= 1 && target_dim <= std::min(n, d),
                  "PCA target dimension must lie in [1, min(n, d)]");
  PcaResult out;
  out.column_means.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out.column_means[c] += x(r, c);
  for (double& m : out.column_means) m /= static_cast<double>(n);
  Matrix centered = x;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centered(r, c) -= out.column_means[c];

  EigenDecomposition eig;
  if (d <= opt.direct_limit) {
    Matrix cov = matmul_tn(centered, centered);
    const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(n, 2) - 1);
    for (double& v : cov.values()) v *= scale;
    eig = symmetric_eigen(std::move(cov));
  } else {
    eig = detail::subspace_eigen(centered, target_dim, opt);
  }

  out.components = Matrix(d, target_dim);
  out.explained_variance.resize(target_dim);
  for (std::size_t j = 0; j < target_dim; ++j) {
    out.explained_variance[j] = std::max(0.0, eig.values[j]);
    std::size_t arg = 0;
    for (std::size_t r = 1; r < d; ++r)
      if (std::abs(eig.vectors(r, j)) > std::abs(eig.vectors(arg, j))) arg = r;
    const double sign = eig.vectors(arg, j) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < d; ++r) out.components(r, j) = sign * eig.vectors(r, j);
  }
  out.projected = matmul(centered, out.components);
  return out;
}

inline Matrix pca_reduce(const Matrix& x, std::size_t target_dim, const PcaOptions& opt = {}) {
  return pca_fit(x, target_dim, opt).projected;
}

// ---------------------------------------------------------------------------
// ROC-AUC
// ---------------------------------------------------------------------------

/// Area under the ROC curve via the Mann-Whitney statistic with average ranks
/// for tied scores: (sum of positive ranks - P(P+1)/2) / (P N).
inline double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  detail::require(scores.size() == labels.size(), "roc_auc: score/label length mismatch");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    detail::require(!std::isnan(scores[i]), "roc_auc: NaN score");
    pos += labels[i] != 0;
  }
  const std::size_t neg = scores.size() - pos;
  detail::require(pos > 0 && neg > 0, "roc_auc needs both positive and negative labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = static_cast<double>(i + 1 + j) / 2.0;  // ranks i+1..j
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) positive_rank_sum += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(pos), nn = static_cast<double>(neg);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * nn);
}

}  // namespace hcm
