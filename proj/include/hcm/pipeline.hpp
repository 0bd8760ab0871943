#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hcm/bench.hpp"
#include "hcm/error.hpp"
#include "hcm/graph.hpp"
#include "hcm/hop_labels.hpp"
#include "hcm/inference.hpp"
#include "hcm/model.hpp"
#include "hcm/optim.hpp"
#include "hcm/preprocess.hpp"
#include "hcm/rng.hpp"

namespace hcm {

/// Which adjacency defines the neighborhoods N(v) that scores average over.
enum class Neighborhood { original, dropped };

/// Every knob of one detection run. Defaults follow the reference settings for
/// injected-anomaly benchmarks.
struct RunConfig {
  std::string dataset;  // manifest path (CLI only)
  std::string output_dir;

  double drop_ratio = 0.2;    // R
  std::size_t classes = 4;    // C
  double sample_ratio = 0.3;  // S

  std::size_t gcn_layers = 2;
  std::size_t gcn_width = 128;
  std::size_t mlp_width = 256;
  bool use_bias = false;

  double lr = 0.01;
  double weight_decay = 5e-8;
  OptimizerKind optimizer = OptimizerKind::sgld;
  StepSchedule schedule;
  double noise_scale = 1.0;  // test hook, see OptimConfig

  std::size_t pca_dim = 0;  // reduce model inputs to this many principal components; 0 = off

  std::size_t burn_in_epochs = 200;
  std::size_t posterior_samples = 100;  // T
  ScoreKind score = ScoreKind::ahp;
  Neighborhood neighborhood = Neighborhood::original;
  PredictionMode prediction = PredictionMode::argmax;
  bool auc_trace = false;  // per-epoch AUC of single-sample AHP (needs labels)

  std::uint64_t seed = 1;

  OptimConfig optim() const {
    OptimConfig o;
    o.step_size = lr;
    o.weight_decay = weight_decay;
    o.mode = optimizer;
    o.schedule = schedule;
    o.noise_scale = noise_scale;
    return o;
  }

  void validate() const {
    DropConfig{drop_ratio}.validate();
    detail::require(classes >= 2, "classes C must be >= 2");
    detail::require(sample_ratio > 0.0 && sample_ratio <= 1.0, "sample ratio S must lie in (0, 1]");
    detail::require(gcn_layers >= 1 && gcn_width >= 1 && mlp_width >= 1,
                    "layer counts and widths must be positive");
    detail::require(posterior_samples >= 1, "posterior samples T must be >= 1");
    optim().validate();
  }
};

/// Named random substreams of one root seed.
namespace streams {
inline constexpr const char* init = "init";
inline constexpr const char* sampling = "sampling";
inline constexpr const char* noise = "sgld-noise";
inline constexpr const char* posterior_sampling = "posterior-sampling";
inline constexpr const char* posterior_noise = "posterior-noise";
inline constexpr const char* injection = "injection";
inline constexpr const char* generation = "generation";
}  // namespace streams

/// Graph-derived inputs shared by training and scoring.
struct PreparedGraph {
  SparseAdjacency original;
  SparseAdjacency dropped;
  NormalizedPropagator propagator;  // from the dropped adjacency
  HopLabelSets label_sets;          // from the dropped adjacency
  Matrix features;                  // model input: raw or PCA-reduced attributes

  const SparseAdjacency& scoring(Neighborhood n) const {
    return n == Neighborhood::original ? original : dropped;
  }
};

inline PreparedGraph prepare_graph(const AttributedNetwork& net, const RunConfig& cfg) {
  net.validate();
  PreparedGraph g;
  g.original = net.adjacency();
  g.dropped = drop_edges(net, DropConfig{cfg.drop_ratio});
  g.propagator = normalized_propagator(g.dropped);
  g.label_sets = build_label_sets(g.dropped, cfg.classes);
  g.features = cfg.pca_dim > 0 ? pca_reduce(net.attributes, cfg.pca_dim) : net.attributes;
  return g;
}

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_curve;
  std::vector<double> auc_trace;  // empty unless requested and labels exist
};

/// Called after every training epoch with (epoch, loss, params).
using EpochObserver = std::function<void(std::size_t, double, const ModelParams&)>;

/// Burn-in training: each epoch draws a fresh balanced batch and takes one
/// optimizer step on the mean cross-entropy.
inline TrainResult train_model(const AttributedNetwork& net, const PreparedGraph& graph,
                               const RunConfig& cfg, const EpochObserver& observer = {}) {
  cfg.validate();
  const ArchSpec arch = ArchSpec::make(graph.features.cols(), cfg.gcn_layers, cfg.gcn_width,
                                       cfg.mlp_width, cfg.classes, cfg.use_bias);
  Rng init_rng = make_stream(cfg.seed, streams::init);
  Rng sampling_rng = make_stream(cfg.seed, streams::sampling);
  Rng noise_rng = make_stream(cfg.seed, streams::noise);
  const OptimConfig optim = cfg.optim();

  TrainResult out{init_params(arch, init_rng), {}, {}};
  const bool trace = cfg.auc_trace && net.anomaly_flags.has_value();
  const SparseAdjacency& scoring = graph.scoring(cfg.neighborhood);
  const std::vector<Edge> scored_pairs = scoring.edges();

  ForwardCache cache;
  for (std::size_t epoch = 0; epoch < cfg.burn_in_epochs; ++epoch) {
    const PairBatch batch = balanced_sample(graph.label_sets, cfg.sample_ratio, sampling_rng);
    const double loss = forward_loss(out.params, graph.propagator, graph.features, batch.pairs,
                                     batch.labels, cache);
    const Gradients grads = backward(cache, batch.labels, out.params, graph.propagator);
    optimizer_step(out.params, grads, optim, noise_rng, epoch);
    out.loss_curve.push_back(loss);
    if (trace) {
      PosteriorSamples single(scored_pairs);
      single.add_sample(predict_hops(out.params, graph.propagator, graph.features, scored_pairs,
                                     cfg.prediction));
      out.auc_trace.push_back(roc_auc(ahp_scores(single, scoring), *net.anomaly_flags));
    }
    if (observer) observer(epoch, loss, out.params);
  }
  return out;
}

struct ScoreResult {
  AnomalyScores scores;
  std::optional<double> auc_ahp;
  std::optional<double> auc_hav;
};

/// Posterior collection from trained weights followed by AHP/IV/HAV scoring.
inline ScoreResult score_model(const AttributedNetwork& net, const PreparedGraph& graph,
                               const RunConfig& cfg, ModelParams params) {
  cfg.validate();
  const SparseAdjacency& scoring = graph.scoring(cfg.neighborhood);
  const PosteriorInputs in{.propagator = graph.propagator,
                           .attributes = graph.features,
                           .label_sets = graph.label_sets,
                           .sample_ratio = cfg.sample_ratio,
                           .scored_pairs = scoring.edges(),
                           .mode = cfg.prediction,
                           .freeze_weights = false,
                           .step_offset = cfg.burn_in_epochs};
  Rng sampling_rng = make_stream(cfg.seed, streams::posterior_sampling);
  Rng noise_rng = make_stream(cfg.seed, streams::posterior_noise);
  const PosteriorSamples samples =
      collect_posterior(params, in, cfg.posterior_samples, cfg.optim(), sampling_rng, noise_rng);

  ScoreResult r;
  r.scores = compute_scores(samples, scoring, cfg.score);
  if (net.anomaly_flags) {
    const auto& labels = *net.anomaly_flags;
    const bool both = std::any_of(labels.begin(), labels.end(), [](auto v) { return v != 0; }) &&
                      std::any_of(labels.begin(), labels.end(), [](auto v) { return v == 0; });
    if (both) {
      r.auc_ahp = roc_auc(r.scores.s_ahp, labels);
      r.auc_hav = roc_auc(r.scores.s_hav, labels);
    }
  }
  return r;
}

struct RunResult {
  TrainResult training;
  ScoreResult scoring;
  double wall_time_seconds = 0.0;
};

inline RunResult run_detection(const AttributedNetwork& net, const RunConfig& cfg,
                               const EpochObserver& observer = {}) {
  const auto start = std::chrono::steady_clock::now();
  const PreparedGraph graph = prepare_graph(net, cfg);
  RunResult r;
  r.training = train_model(net, graph, cfg, observer);
  r.scoring = score_model(net, graph, cfg, r.training.params);
  r.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Mean of `scores` over nodes with the given label value.
inline double mean_over_label(std::span<const double> scores, std::span<const std::uint8_t> labels,
                              bool anomalous) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if ((labels[i] != 0) == anomalous) {
      total += scores[i];
      ++count;
    }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

/// The desk-scale benchmark: SBM graph, then structural and attribute injection
/// with the same (s, t) and the given candidate pool.
struct BenchmarkSpec {
  SyntheticSpec graph;
  InjectionConfig injection{5, 6, 50};
  bool structural = true;
  bool attribute = true;
};

inline AttributedNetwork make_benchmark(const BenchmarkSpec& spec, std::uint64_t seed) {
  Rng gen = make_stream(seed, streams::generation);
  AttributedNetwork net = sbm_generate(spec.graph, gen);
  Rng inj = make_stream(seed, streams::injection);
  net.anomaly_flags.emplace(net.node_count, 0);
  if (spec.structural) inject_structural(net, spec.injection, inj);
  if (spec.attribute) inject_attribute(net, spec.injection, inj);
  return net;
}

}  // namespace hcm
