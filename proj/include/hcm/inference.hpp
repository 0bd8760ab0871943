#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "hcm/error.hpp"
#include "hcm/graph.hpp"
#include "hcm/hop_labels.hpp"
#include "hcm/model.hpp"
#include "hcm/optim.hpp"

namespace hcm {

/// How a single weight sample turns logits into a hop prediction.
enum class PredictionMode {
  argmax,    // hop value of the most probable class, 1..C
  expected,  // sum_c p_c * (c + 1)
};

enum class ScoreKind { ahp, hav };

/// Hop predictions of one weight sample for the given pairs.
inline std::vector<double> predict_hops(const ModelParams& params, const NormalizedPropagator& prop,
                                        const Matrix& attributes, std::span<const Edge> pairs,
                                        PredictionMode mode = PredictionMode::argmax) {
  ForwardCache cache;
  const Matrix& z = gcn_forward(params, prop, attributes, cache);
  const Matrix& logits = pair_logits(params, z, pairs, cache);
  std::vector<double> out(pairs.size());
  if (mode == PredictionMode::argmax) {
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      auto row = logits.row(r);
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      out[r] = static_cast<double>(best + 1);
    }
  } else {
    const Matrix probs = softmax_rows(logits);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      double e = 0.0;
      for (std::size_t c = 0; c < probs.cols(); ++c) e += probs(r, c) * static_cast<double>(c + 1);
      out[r] = e;
    }
  }
  return out;
}

/// Running mean and (population) variance of per-pair hop predictions over T
/// weight samples. Single pass; individual samples are not retained.
class PosteriorSamples {
 public:
  PosteriorSamples() = default;
  explicit PosteriorSamples(std::vector<Edge> pairs)
      : pairs_(std::move(pairs)), mean_(pairs_.size(), 0.0), m2_(pairs_.size(), 0.0) {
    detail::require(std::is_sorted(pairs_.begin(), pairs_.end()), "scored pairs must be sorted");
  }

  void add_sample(std::span<const double> predictions) {
    detail::require(predictions.size() == pairs_.size(), "prediction count mismatch");
    ++count_;
    const double t = static_cast<double>(count_);
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const double delta = predictions[i] - mean_[i];
      mean_[i] += delta / t;
      m2_[i] += delta * (predictions[i] - mean_[i]);
    }
  }

  std::size_t sample_count() const noexcept { return count_; }
  const std::vector<Edge>& pairs() const noexcept { return pairs_; }
  const std::vector<double>& mean() const noexcept { return mean_; }

  std::vector<double> variance() const {
    std::vector<double> v(m2_.size(), 0.0);
    if (count_ == 0) return v;
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = std::max(0.0, m2_[i] / static_cast<double>(count_));
    return v;
  }

  /// Index of an undirected pair, or pairs().size() if not scored.
  std::size_t find(NodeId a, NodeId b) const {
    const Edge key = Edge::canonical(a, b);
    auto it = std::lower_bound(pairs_.begin(), pairs_.end(), key);
    return (it != pairs_.end() && *it == key) ? static_cast<std::size_t>(it - pairs_.begin())
                                              : pairs_.size();
  }

 private:
  std::vector<Edge> pairs_;
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::size_t count_ = 0;
};

/// Everything the posterior loop reads besides the weights.
struct PosteriorInputs {
  const NormalizedPropagator& propagator;  // training propagator
  const Matrix& attributes;
  const HopLabelSets& label_sets;
  double sample_ratio = 0.3;
  std::vector<Edge> scored_pairs;  // sorted; usually the edges of the scoring adjacency
  PredictionMode mode = PredictionMode::argmax;
  /// Skip the SGLD step between samples (weights stay fixed).
  bool freeze_weights = false;
  /// Iteration index of the first posterior step, for step-size schedules.
  std::uint64_t step_offset = 0;
};

/// For t = 1..T: record predictions for every scored pair, then take one
/// optimizer step on a fresh balanced batch.
inline PosteriorSamples collect_posterior(ModelParams& model, const PosteriorInputs& in,
                                          std::size_t sample_count, const OptimConfig& config,
                                          Rng& sampling_rng, Rng& noise_rng) {
  detail::require(sample_count >= 1, "posterior sample count T must be >= 1");
  config.validate();
  PosteriorSamples samples(in.scored_pairs);
  ForwardCache cache;
  for (std::size_t t = 0; t < sample_count; ++t) {
    samples.add_sample(
        predict_hops(model, in.propagator, in.attributes, in.scored_pairs, in.mode));
    if (in.freeze_weights) continue;
    const PairBatch batch = balanced_sample(in.label_sets, in.sample_ratio, sampling_rng);
    forward_loss(model, in.propagator, in.attributes, batch.pairs, batch.labels, cache);
    const Gradients g = backward(cache, batch.labels, model, in.propagator);
    optimizer_step(model, g, config, noise_rng, in.step_offset + t);
  }
  return samples;
}

struct AnomalyScores {
  std::vector<double> s_ahp;
  std::vector<double> s_iv;
  std::vector<double> s_hav;
  std::vector<std::uint8_t> isolated;
  std::vector<NodeId> ranking;  // by the chosen score, descending; ties by node id

  const std::vector<double>& by_kind(ScoreKind kind) const {
    return kind == ScoreKind::ahp ? s_ahp : s_hav;
  }
};

namespace detail {

// Mean of a per-pair quantity over each node's neighborhood; isolated nodes get 0.
inline std::vector<double> neighborhood_mean(const PosteriorSamples& samples,
                                             std::span<const double> per_pair,
                                             const SparseAdjacency& adj) {
  std::vector<double> out(adj.node_count(), 0.0);
  for (NodeId i = 0; i < adj.node_count(); ++i) {
    auto nb = adj.neighbors(i);
    if (nb.empty()) continue;
    double total = 0.0;
    for (NodeId j : nb) {
      const std::size_t idx = samples.find(i, j);
      if (idx == samples.pairs().size()) {
        throw ContractError("neighbor pair (" + std::to_string(i) + "," + std::to_string(j) +
                            ") has no posterior samples");
      }
      total += per_pair[idx];
    }
    out[i] = total / static_cast<double>(nb.size());
  }
  return out;
}

// x / max(x), or all zeros when the max is not positive.
inline std::vector<double> max_normalized(const std::vector<double>& x) {
  const double mx = x.empty() ? 0.0 : *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size(), 0.0);
  if (mx > 0.0)
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / mx;
  return out;
}

}  // namespace detail

/// Average hop prediction between each node and its neighbors.
inline std::vector<double> ahp_scores(const PosteriorSamples& samples, const SparseAdjacency& adj) {
  return detail::neighborhood_mean(samples, samples.mean(), adj);
}

struct HavResult {
  std::vector<double> s_iv;
  std::vector<double> s_hav;
};

/// Inferred variance per node and the max-normalized sum AHP/max + IV/max.
inline HavResult hav_scores(const PosteriorSamples& samples, const SparseAdjacency& adj) {
  const std::vector<double> var = samples.variance();
  HavResult r;
  r.s_iv = detail::neighborhood_mean(samples, var, adj);
  const auto ahp_norm = detail::max_normalized(ahp_scores(samples, adj));
  const auto iv_norm = detail::max_normalized(r.s_iv);
  r.s_hav.resize(ahp_norm.size());
  for (std::size_t i = 0; i < ahp_norm.size(); ++i) r.s_hav[i] = ahp_norm[i] + iv_norm[i];
  return r;
}

/// Node order by score descending, ties by ascending node id.
inline std::vector<NodeId> rank_descending(std::span<const double> scores) {
  std::vector<NodeId> order(scores.size());
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return scores[a] > scores[b]; });
  return order;
}

inline AnomalyScores compute_scores(const PosteriorSamples& samples, const SparseAdjacency& adj,
                                    ScoreKind rank_by = ScoreKind::ahp) {
  AnomalyScores s;
  s.s_ahp = ahp_scores(samples, adj);
  auto hav = hav_scores(samples, adj);
  s.s_iv = std::move(hav.s_iv);
  s.s_hav = std::move(hav.s_hav);
  s.isolated.resize(adj.node_count());
  for (NodeId i = 0; i < adj.node_count(); ++i) s.isolated[i] = adj.degree(i) == 0;
  s.ranking = rank_descending(s.by_kind(rank_by));
  return s;
}

}  // namespace hcm
