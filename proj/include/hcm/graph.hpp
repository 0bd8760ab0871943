#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hcm/error.hpp"
#include "hcm/matrix.hpp"

namespace hcm {

using NodeId = std::uint32_t;

/// Undirected edge in canonical form (u < v).
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  static Edge canonical(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class AttributeKind { binary, continuous };

/// Compressed sparse rows. Column indices are strictly increasing within each row.
struct CsrMatrix {
  std::vector<std::size_t> row_offsets{0};
  std::vector<NodeId> column_indices;
  std::vector<double> values;

  std::size_t rows() const noexcept { return row_offsets.size() - 1; }
  std::size_t nnz() const noexcept { return column_indices.size(); }
  std::size_t row_size(std::size_t r) const noexcept {
    return row_offsets[r + 1] - row_offsets[r];
  }
  std::span<const NodeId> columns(std::size_t r) const noexcept {
    return {column_indices.data() + row_offsets[r], row_size(r)};
  }
  std::span<const double> row_values(std::size_t r) const noexcept {
    return {values.data() + row_offsets[r], row_size(r)};
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

/// Symmetric, hollow adjacency of an undirected graph. Both directions of every
/// edge are stored, each with value 1.
class SparseAdjacency {
 public:
  SparseAdjacency() = default;

  std::size_t node_count() const noexcept { return csr_.rows(); }
  /// Undirected edge count m.
  std::size_t edge_count() const noexcept { return csr_.nnz() / 2; }
  std::size_t degree(NodeId v) const noexcept { return csr_.row_size(v); }
  std::span<const NodeId> neighbors(NodeId v) const noexcept { return csr_.columns(v); }
  const CsrMatrix& csr() const noexcept { return csr_; }

  bool has_edge(NodeId a, NodeId b) const {
    auto nb = neighbors(a);
    return std::binary_search(nb.begin(), nb.end(), b);
  }

  /// Undirected edges (u < v), ascending lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count());
    for (NodeId u = 0; u < node_count(); ++u)
      for (NodeId v : neighbors(u))
        if (u < v) out.push_back({u, v});
    return out;
  }

  /// Structural hash; identifies which graph derived data was computed from.
  std::uint64_t fingerprint() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ node_count();
    auto mix = [&h](std::uint64_t x) {
      h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    for (auto o : csr_.row_offsets) mix(o);
    for (auto c : csr_.column_indices) mix(c);
    return h;
  }

  friend bool operator==(const SparseAdjacency&, const SparseAdjacency&) = default;

 private:
  explicit SparseAdjacency(CsrMatrix csr) : csr_(std::move(csr)) {}
  friend SparseAdjacency build_adjacency(std::span<const Edge>, std::size_t);

  CsrMatrix csr_;
};

/// D^-1/2 (A + I) D^-1/2 with D the self-loop-augmented degrees.
class NormalizedPropagator {
 public:
  NormalizedPropagator() = default;

  std::size_t node_count() const noexcept { return csr_.rows(); }
  const CsrMatrix& csr() const noexcept { return csr_; }
  std::uint64_t source_fingerprint() const noexcept { return source_fingerprint_; }

 private:
  NormalizedPropagator(CsrMatrix csr, std::uint64_t fp)
      : csr_(std::move(csr)), source_fingerprint_(fp) {}
  friend NormalizedPropagator normalized_propagator(const SparseAdjacency&);

  CsrMatrix csr_;
  std::uint64_t source_fingerprint_ = 0;
};

/// Deduplicates, drops self-loops and symmetrizes. Any orientation and order of
/// the input yields the same layout.
inline SparseAdjacency build_adjacency(std::span<const Edge> edge_list, std::size_t node_count) {
  std::vector<Edge> canon;
  canon.reserve(edge_list.size());
  for (const Edge& e : edge_list) {
    for (NodeId idx : {e.u, e.v}) {
      if (idx >= node_count) {
        throw InputError("edge endpoint " + std::to_string(idx) + " out of range for " +
                         std::to_string(node_count) + " nodes");
      }
    }
    if (e.u == e.v) continue;
    canon.push_back(Edge::canonical(e.u, e.v));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

  CsrMatrix csr;
  csr.row_offsets.assign(node_count + 1, 0);
  for (const Edge& e : canon) {
    ++csr.row_offsets[e.u + 1];
    ++csr.row_offsets[e.v + 1];
  }
  for (std::size_t i = 0; i < node_count; ++i) csr.row_offsets[i + 1] += csr.row_offsets[i];
  csr.column_indices.resize(csr.row_offsets.back());
  csr.values.assign(csr.row_offsets.back(), 1.0);
  std::vector<std::size_t> cursor(csr.row_offsets.begin(), csr.row_offsets.end() - 1);
  // Sorted (u, v) input fills every row in ascending column order: row r first
  // receives its lower neighbors (as v, in u order) then its higher ones.
  for (const Edge& e : canon) csr.column_indices[cursor[e.v]++] = e.u;
  for (const Edge& e : canon) csr.column_indices[cursor[e.u]++] = e.v;
  return SparseAdjacency(std::move(csr));
}

inline SparseAdjacency build_adjacency(std::span<const std::pair<NodeId, NodeId>> pairs,
                                       std::size_t node_count) {
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (auto [a, b] : pairs) edges.push_back({a, b});
  return build_adjacency(std::span<const Edge>(edges), node_count);
}

inline NormalizedPropagator normalized_propagator(const SparseAdjacency& adj) {
  const std::size_t n = adj.node_count();
  std::vector<double> inv_sqrt(n);
  for (NodeId i = 0; i < n; ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(adj.degree(i) + 1));

  CsrMatrix csr;
  csr.row_offsets.assign(n + 1, 0);
  csr.column_indices.reserve(adj.csr().nnz() + n);
  csr.values.reserve(adj.csr().nnz() + n);
  for (NodeId i = 0; i < n; ++i) {
    bool diagonal_done = false;
    auto emit = [&](NodeId j) {
      csr.column_indices.push_back(j);
      csr.values.push_back(inv_sqrt[i] * inv_sqrt[j]);
    };
    for (NodeId j : adj.neighbors(i)) {
      if (!diagonal_done && j > i) {
        emit(i);
        diagonal_done = true;
      }
      emit(j);
    }
    if (!diagonal_done) emit(i);
    csr.row_offsets[i + 1] = csr.column_indices.size();
  }
  return NormalizedPropagator(std::move(csr), adj.fingerprint());
}

/// Sparse-dense product. Each output row sums its terms in ascending column order.
inline Matrix spmm(const CsrMatrix& sparse, const Matrix& dense) {
  if (dense.rows() != sparse.rows()) {
    throw InputError("spmm: dense operand has " + std::to_string(dense.rows()) +
                     " rows, expected " + std::to_string(sparse.rows()));
  }
  Matrix out(sparse.rows(), dense.cols());
  const std::size_t k = dense.cols();
  for (std::size_t r = 0; r < sparse.rows(); ++r) {
    double* dst = out.row(r).data();
    auto cols = sparse.columns(r);
    auto vals = sparse.row_values(r);
    for (std::size_t e = 0; e < cols.size(); ++e) {
      const double w = vals[e];
      const double* src = dense.row(cols[e]).data();
      for (std::size_t j = 0; j < k; ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

inline Matrix spmm(const NormalizedPropagator& prop, const Matrix& dense) {
  return spmm(prop.csr(), dense);
}

/// Graph G = {V, E, X} with optional ground-truth anomaly flags.
struct AttributedNetwork {
  std::size_t node_count = 0;
  std::vector<Edge> edges;  // canonical, sorted, unique
  Matrix attributes;        // node_count x d
  AttributeKind attribute_kind = AttributeKind::continuous;
  std::optional<std::vector<std::uint8_t>> anomaly_flags;

  std::size_t attribute_dim() const noexcept { return attributes.cols(); }
  SparseAdjacency adjacency() const { return build_adjacency(std::span<const Edge>(edges), node_count); }

  /// Re-establishes the canonical edge list after raw insertions.
  void canonicalize_edges() { edges = adjacency().edges(); }

  void validate() const {
    detail::require(node_count >= 1, "network must have at least one node");
    detail::require(attributes.rows() == node_count,
                    "attribute matrix has " + std::to_string(attributes.rows()) +
                        " rows, expected " + std::to_string(node_count));
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const Edge& e = edges[i];
      detail::require(e.u < e.v, "edge list must be canonical without self-loops");
      detail::require(e.v < node_count, "edge endpoint " + std::to_string(e.v) + " out of range");
      detail::require(i == 0 || edges[i - 1] < e, "edge list must be sorted and unique");
    }
    if (anomaly_flags) {
      detail::require(anomaly_flags->size() == node_count, "label vector length mismatch");
    }
  }

  friend bool operator==(const AttributedNetwork&, const AttributedNetwork&) = default;
};

}  // namespace hcm
