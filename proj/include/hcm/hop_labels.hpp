#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "hcm/error.hpp"
#include "hcm/graph.hpp"
#include "hcm/rng.hpp"

namespace hcm {

inline constexpr std::uint32_t kBeyondCutoff = std::numeric_limits<std::uint32_t>::max();

/// Hop distances from `source`; nodes farther than `cutoff` (or unreachable) get
/// kBeyondCutoff.
inline std::vector<std::uint32_t> bfs_hops(const SparseAdjacency& adj, NodeId source,
                                           std::uint32_t cutoff) {
  detail::require(source < adj.node_count(), "bfs source out of range");
  detail::require(cutoff >= 1, "bfs cutoff must be >= 1");
  std::vector<std::uint32_t> dist(adj.node_count(), kBeyondCutoff);
  std::vector<NodeId> frontier{source};
  std::vector<NodeId> next;
  dist[source] = 0;
  for (std::uint32_t level = 1; level <= cutoff && !frontier.empty(); ++level) {
    next.clear();
    for (NodeId u : frontier)
      for (NodeId v : adj.neighbors(u))
        if (dist[v] == kBeyondCutoff) {
          dist[v] = level;
          next.push_back(v);
        }
    frontier.swap(next);
  }
  return dist;
}

/// Class index of a hop value: hop h maps to min(h, C) - 1; unreachable maps to C - 1.
inline std::size_t hop_class(std::uint32_t hop, std::size_t class_count) {
  if (hop == kBeyondCutoff || hop >= class_count) return class_count - 1;
  return hop - 1;
}

/// Node pairs grouped by hop class. Classes 0..C-2 (hop 1..C-1) are enumerated;
/// the last class (hop >= C, including unreachable pairs) is the complement and is
/// only materialized when it is too sparse for rejection sampling.
struct HopLabelSets {
  std::size_t class_count = 0;
  std::size_t node_count = 0;
  std::vector<std::vector<Edge>> near_classes;  // size C - 1, each sorted
  std::uint64_t far_count = 0;
  std::vector<Edge> far_pairs;  // explicit far class, empty when sampled by rejection
  bool far_explicit = false;
  CsrMatrix near_index;  // per node: sorted nodes within C - 1 hops (values unused)
  std::uint64_t source_fingerprint = 0;

  std::uint64_t class_size(std::size_t c) const {
    return c + 1 < class_count ? near_classes[c].size() : far_count;
  }

  bool is_near(NodeId a, NodeId b) const {
    auto cols = near_index.columns(a);
    return std::binary_search(cols.begin(), cols.end(), b);
  }
};

namespace detail {

inline CsrMatrix build_near_index(std::size_t n, const std::vector<std::vector<Edge>>& classes) {
  CsrMatrix idx;
  idx.row_offsets.assign(n + 1, 0);
  for (const auto& cls : classes)
    for (const Edge& e : cls) {
      ++idx.row_offsets[e.u + 1];
      ++idx.row_offsets[e.v + 1];
    }
  for (std::size_t i = 0; i < n; ++i) idx.row_offsets[i + 1] += idx.row_offsets[i];
  idx.column_indices.resize(idx.row_offsets.back());
  std::vector<std::size_t> cursor(idx.row_offsets.begin(), idx.row_offsets.end() - 1);
  for (const auto& cls : classes)
    for (const Edge& e : cls) {
      idx.column_indices[cursor[e.u]++] = e.v;
      idx.column_indices[cursor[e.v]++] = e.u;
    }
  for (std::size_t r = 0; r < n; ++r)
    std::sort(idx.column_indices.begin() + static_cast<std::ptrdiff_t>(idx.row_offsets[r]),
              idx.column_indices.begin() + static_cast<std::ptrdiff_t>(idx.row_offsets[r + 1]));
  return idx;
}

// Rejection sampling draws about total/far candidates per accepted pair; past
// this ratio the far class is listed explicitly instead.
inline constexpr std::uint64_t kMaxRejectionRatio = 64;
inline constexpr std::uint64_t kMinImplicitFarCount = 1024;

inline std::vector<Edge> scan_far_pairs(const HopLabelSets& sets) {
  std::vector<Edge> out;
  const auto n = static_cast<NodeId>(sets.node_count);
  for (NodeId a = 0; a < n; ++a)
    for (NodeId b = a + 1; b < n; ++b)
      if (!sets.is_near(a, b)) out.push_back({a, b});
  return out;
}

}  // namespace detail

inline HopLabelSets build_label_sets(const SparseAdjacency& adj, std::size_t class_count) {
  const std::size_t n = adj.node_count();
  detail::require(class_count >= 2, "class count C must be >= 2");
  detail::require(n >= 2, "hop labels need at least two nodes");

  HopLabelSets sets;
  sets.class_count = class_count;
  sets.node_count = n;
  sets.source_fingerprint = adj.fingerprint();
  sets.near_classes.assign(class_count - 1, {});

  const auto cutoff = static_cast<std::uint32_t>(class_count - 1);
  std::vector<std::uint32_t> dist(n, kBeyondCutoff);
  std::vector<NodeId> frontier, next, touched;
  for (NodeId s = 0; s < n; ++s) {
    // Same traversal as bfs_hops, with buffers reused across sources.
    dist[s] = 0;
    touched.assign(1, s);
    frontier.assign(1, s);
    for (std::uint32_t level = 1; level <= cutoff && !frontier.empty(); ++level) {
      next.clear();
      for (NodeId u : frontier)
        for (NodeId v : adj.neighbors(u))
          if (dist[v] == kBeyondCutoff) {
            dist[v] = level;
            next.push_back(v);
            touched.push_back(v);
            if (v > s) sets.near_classes[level - 1].push_back({s, v});
          }
      frontier.swap(next);
    }
    for (NodeId v : touched) dist[v] = kBeyondCutoff;
  }

  std::uint64_t near_total = 0;
  for (auto& cls : sets.near_classes) {
    std::sort(cls.begin(), cls.end());
    near_total += cls.size();
  }
  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  sets.far_count = total - near_total;
  sets.near_index = detail::build_near_index(n, sets.near_classes);

  if (sets.far_count > 0 && (sets.far_count * detail::kMaxRejectionRatio < total ||
                             sets.far_count <= detail::kMinImplicitFarCount)) {
    sets.far_explicit = true;
    sets.far_pairs = detail::scan_far_pairs(sets);
  }
  return sets;
}

/// Class-balanced pairs with labels in [0, C).
struct PairBatch {
  std::vector<Edge> pairs;
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return pairs.size(); }
  friend bool operator==(const PairBatch&, const PairBatch&) = default;
};

/// Per-class quota max(1, floor(S * smallest nonempty enumerated class size)).
inline std::size_t per_class_quota(std::span<const std::uint64_t> enumerated_sizes,
                                   double sample_ratio) {
  std::uint64_t smallest = 0;
  for (auto s : enumerated_sizes)
    if (s > 0 && (smallest == 0 || s < smallest)) smallest = s;
  detail::require(smallest > 0, "all hop classes are empty");
  const auto q = static_cast<std::size_t>(std::floor(sample_ratio * static_cast<double>(smallest)));
  return std::max<std::size_t>(1, q);
}

namespace detail {

// q distinct indices from [0, n), sorted (Floyd's algorithm).
inline std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::uint64_t q, Rng& rng) {
  std::vector<std::uint64_t> out;
  if (q >= n) {
    out.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) out[i] = i;
    return out;
  }
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(q * 2);
  for (std::uint64_t j = n - q; j < n; ++j) {
    const std::uint64_t t = rng.index(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  out.assign(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Draws a fresh balanced batch: q pairs per nonempty class, uniformly without
/// replacement. The far class is sampled by rejection against the near index.
inline PairBatch balanced_sample(const HopLabelSets& sets, double sample_ratio, Rng& rng) {
  detail::require(sample_ratio > 0.0 && sample_ratio <= 1.0, "sampling ratio S must lie in (0, 1]");
  std::vector<std::uint64_t> sizes;
  for (const auto& cls : sets.near_classes) sizes.push_back(cls.size());
  const std::size_t q = per_class_quota(sizes, sample_ratio);

  PairBatch batch;
  const std::size_t far_label = sets.class_count - 1;
  for (std::size_t c = 0; c < far_label; ++c) {
    const auto& cls = sets.near_classes[c];
    for (auto i : detail::sample_indices(cls.size(), q, rng)) {
      batch.pairs.push_back(cls[i]);
      batch.labels.push_back(static_cast<std::uint32_t>(c));
    }
  }

  if (sets.far_count == 0) return batch;
  if (sets.far_explicit) {
    for (auto i : detail::sample_indices(sets.far_pairs.size(), q, rng)) {
      batch.pairs.push_back(sets.far_pairs[i]);
      batch.labels.push_back(static_cast<std::uint32_t>(far_label));
    }
    return batch;
  }
  if (q >= sets.far_count) {
    for (const Edge& e : detail::scan_far_pairs(sets)) {
      batch.pairs.push_back(e);
      batch.labels.push_back(static_cast<std::uint32_t>(far_label));
    }
    return batch;
  }
  std::vector<Edge> drawn;
  std::unordered_set<std::uint64_t> seen;
  const std::uint64_t n = sets.node_count;
  while (drawn.size() < q) {
    const auto a = static_cast<NodeId>(rng.index(n));
    const auto b = static_cast<NodeId>(rng.index(n));
    if (a == b || sets.is_near(a, b)) continue;
    const Edge e = Edge::canonical(a, b);
    if (!seen.insert(static_cast<std::uint64_t>(e.u) * n + e.v).second) continue;
    drawn.push_back(e);
  }
  for (const Edge& e : drawn) {
    batch.pairs.push_back(e);
    batch.labels.push_back(static_cast<std::uint32_t>(far_label));
  }
  return batch;
}

}  // namespace hcm
