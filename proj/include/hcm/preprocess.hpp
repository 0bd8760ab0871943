#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "hcm/error.hpp"
#include "hcm/graph.hpp"

namespace hcm {

/// |supp(a) ∩ supp(b)| / |supp(a) ∪ supp(b)|, 0 for an empty union.
inline double jaccard_similarity(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size(), "jaccard_similarity: vector length mismatch");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const bool x = a[k] == 1.0;
    const bool y = b[k] == 1.0;
    if ((!x && a[k] != 0.0) || (!y && b[k] != 0.0)) {
      throw InputError("jaccard_similarity: non-binary attribute at position " +
                       std::to_string(k));
    }
    inter += (x && y);
    uni += (x || y);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// a·b / (|a| |b|), 0 when either norm vanishes.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size(), "cosine_similarity: vector length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct EdgeSimilarity {
  Edge edge;
  double similarity = 0.0;
};

struct DropConfig {
  double drop_ratio = 0.2;

  void validate() const {
    detail::require(drop_ratio >= 0.0 && drop_ratio < 1.0, "drop ratio must lie in [0, 1)");
  }
};

inline double edge_similarity(const AttributedNetwork& net, const Edge& e) {
  const auto xi = net.attributes.row(e.u);
  const auto xj = net.attributes.row(e.v);
  return net.attribute_kind == AttributeKind::binary ? jaccard_similarity(xi, xj)
                                                     : cosine_similarity(xi, xj);
}

inline std::vector<EdgeSimilarity> edge_similarities(const AttributedNetwork& net) {
  std::vector<EdgeSimilarity> out;
  out.reserve(net.edges.size());
  for (const Edge& e : net.edges) out.push_back({e, edge_similarity(net, e)});
  return out;
}

/// Number of undirected edges removed for ratio r on m edges.
inline std::size_t dropped_edge_count(std::size_t m, double r) {
  return static_cast<std::size_t>(std::floor(r * static_cast<double>(m)));
}

/// Removes the floor(R m) least similar edges; equal similarities are removed in
/// ascending (u, v) order.
inline SparseAdjacency drop_edges(const AttributedNetwork& net, const DropConfig& config) {
  config.validate();
  auto sims = edge_similarities(net);
  const std::size_t drop = dropped_edge_count(sims.size(), config.drop_ratio);
  std::stable_sort(sims.begin(), sims.end(), [](const EdgeSimilarity& a, const EdgeSimilarity& b) {
    if (a.similarity != b.similarity) return a.similarity < b.similarity;
    return a.edge < b.edge;
  });
  std::vector<Edge> kept;
  kept.reserve(sims.size() - drop);
  for (std::size_t i = drop; i < sims.size(); ++i) kept.push_back(sims[i].edge);
  return build_adjacency(std::span<const Edge>(kept), net.node_count);
}

}  // namespace hcm
