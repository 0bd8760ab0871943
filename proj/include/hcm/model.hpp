#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hcm/error.hpp"
#include "hcm/graph.hpp"
#include "hcm/matrix.hpp"
#include "hcm/rng.hpp"

namespace hcm {

/// Layer widths of the GCN encoder and the MLP pair classifier.
///
/// gcn_dims = {d, h_1, ..., h_L}: L graph convolutions mapping d attributes to an
/// h_L-dimensional embedding. mlp_dims = {h_L, m_1, ..., C}: fully connected
/// layers, ReLU between them, linear output producing C logits.
struct ArchSpec {
  std::vector<std::size_t> gcn_dims;
  std::vector<std::size_t> mlp_dims;
  bool use_bias = false;

  static ArchSpec make(std::size_t attribute_dim, std::size_t gcn_layers, std::size_t gcn_width,
                       std::size_t mlp_width, std::size_t class_count, bool use_bias = false) {
    ArchSpec a;
    a.gcn_dims.push_back(attribute_dim);
    for (std::size_t l = 0; l < gcn_layers; ++l) a.gcn_dims.push_back(gcn_width);
    a.mlp_dims = {gcn_width, mlp_width, class_count};
    a.use_bias = use_bias;
    return a;
  }

  std::size_t class_count() const { return mlp_dims.empty() ? 0 : mlp_dims.back(); }
  std::size_t embedding_dim() const { return gcn_dims.empty() ? 0 : gcn_dims.back(); }

  void validate() const {
    detail::require(gcn_dims.size() >= 2, "GCN needs at least one layer");
    detail::require(mlp_dims.size() >= 2, "MLP needs at least one layer");
    for (auto d : gcn_dims) detail::require(d > 0, "layer widths must be positive");
    for (auto d : mlp_dims) detail::require(d > 0, "layer widths must be positive");
    detail::require(gcn_dims.back() == mlp_dims.front(),
                    "MLP input width must equal the GCN embedding width");
    detail::require(mlp_dims.back() >= 2, "MLP must output at least two classes");
  }

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

struct DenseLayer {
  Matrix weight;             // fan_in x fan_out
  std::vector<double> bias;  // fan_out entries, or empty when biases are off

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Same shapes as the trainable parameters.
struct Gradients {
  std::vector<DenseLayer> gcn;
  std::vector<DenseLayer> mlp;
};

namespace detail {

inline std::uint64_t next_stamp() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace detail

struct ModelParams {
  ArchSpec arch;
  std::vector<DenseLayer> gcn;
  std::vector<DenseLayer> mlp;
  /// Changes whenever the weights change; ties a ForwardCache to the weights it saw.
  std::uint64_t stamp = detail::next_stamp();

  void touch() { stamp = detail::next_stamp(); }

  template <typename F>
  void for_each_layer(F&& f) {
    for (auto& l : gcn) f(l);
    for (auto& l : mlp) f(l);
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto* group : {&gcn, &mlp})
      for (const auto& l : *group) total += l.weight.size() + l.bias.size();
    return total;
  }

  bool same_weights(const ModelParams& o) const {
    return arch == o.arch && gcn == o.gcn && mlp == o.mlp;
  }
};

inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// Glorot-uniform weights, zero biases.
inline ModelParams init_params(const ArchSpec& arch, Rng& rng) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  auto make_layers = [&](const std::vector<std::size_t>& dims, std::vector<DenseLayer>& out) {
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      DenseLayer layer{Matrix(dims[l], dims[l + 1]), {}};
      const double bound = glorot_bound(dims[l], dims[l + 1]);
      for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
      if (arch.use_bias) layer.bias.assign(dims[l + 1], 0.0);
      out.push_back(std::move(layer));
    }
  };
  make_layers(arch.gcn_dims, p.gcn);
  make_layers(arch.mlp_dims, p.mlp);
  return p;
}

inline Gradients zero_gradients(const ModelParams& p) {
  Gradients g;
  for (const auto& l : p.gcn)
    g.gcn.push_back({Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size())});
  for (const auto& l : p.mlp)
    g.mlp.push_back({Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size())});
  return g;
}

/// Activations kept from the forward pass for backpropagation.
struct ForwardCache {
  // Graph encoder. aggregated[l] = P * H^(l), preact[l] = aggregated[l] * W^(l) (+ b),
  // hidden[l + 1] = ReLU(preact[l]); hidden[0] = X, hidden[L] = Z.
  std::vector<Matrix> hidden;
  std::vector<Matrix> aggregated;
  std::vector<Matrix> preact;

  // Pair head. mlp_input[0] = z_d = |Z_m - Z_n|; mlp_input[k + 1] = ReLU(mlp_preact[k]).
  std::vector<Edge> pairs;
  std::vector<Matrix> mlp_input;
  std::vector<Matrix> mlp_preact;
  Matrix logits;

  std::uint64_t params_stamp = 0;
  std::uint64_t propagator_fingerprint = 0;
  bool encoder_ready = false;
  bool head_ready = false;

  const Matrix& embeddings() const { return hidden.back(); }
  const Matrix& pair_features() const { return mlp_input.front(); }
};

namespace detail {

inline void add_bias(Matrix& m, const std::vector<double>& bias) {
  if (bias.empty()) return;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double* row = m.row(r).data();
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += bias[c];
  }
}

inline void column_sums(const Matrix& m, std::vector<double>& out) {
  if (out.empty()) return;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.row(r).data();
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c];
  }
}

inline Matrix relu(const Matrix& m) {
  Matrix out = m;
  relu_inplace(out);
  return out;
}

// Zeroes grad entries whose pre-activation was not positive.
inline void relu_backward(Matrix& grad, const Matrix& preact) {
  auto& g = grad.values();
  const auto& p = preact.values();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(p[i] > 0.0)) g[i] = 0.0;
}

}  // namespace detail

/// H^(l+1) = ReLU(P H^(l) W^(l)) for every layer; returns Z = H^(L).
inline const Matrix& gcn_forward(const ModelParams& params, const NormalizedPropagator& prop,
                                 const Matrix& attributes, ForwardCache& cache) {
  if (attributes.cols() != params.arch.gcn_dims.front()) {
    throw InputError("gcn_forward: attributes have " + std::to_string(attributes.cols()) +
                     " columns, model expects " + std::to_string(params.arch.gcn_dims.front()));
  }
  if (attributes.rows() != prop.node_count()) {
    throw InputError("gcn_forward: attribute rows do not match the propagator size");
  }
  const std::size_t layers = params.gcn.size();
  cache.hidden.resize(layers + 1);
  cache.aggregated.resize(layers);
  cache.preact.resize(layers);
  cache.hidden[0] = attributes;
  for (std::size_t l = 0; l < layers; ++l) {
    cache.aggregated[l] = spmm(prop, cache.hidden[l]);
    cache.preact[l] = matmul(cache.aggregated[l], params.gcn[l].weight);
    detail::add_bias(cache.preact[l], params.gcn[l].bias);
    cache.hidden[l + 1] = detail::relu(cache.preact[l]);
  }
  cache.params_stamp = params.stamp;
  cache.propagator_fingerprint = prop.source_fingerprint();
  cache.encoder_ready = true;
  cache.head_ready = false;
  return cache.embeddings();
}

/// |Z_m - Z_n| for every pair.
inline Matrix pair_features(const Matrix& embeddings, std::span<const Edge> pairs) {
  Matrix out(pairs.size(), embeddings.cols());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    detail::require(pairs[p].u < embeddings.rows() && pairs[p].v < embeddings.rows(),
                    "pair index out of range");
    auto zm = embeddings.row(pairs[p].u);
    auto zn = embeddings.row(pairs[p].v);
    double* dst = out.row(p).data();
    for (std::size_t c = 0; c < out.cols(); ++c) dst[c] = std::abs(zm[c] - zn[c]);
  }
  return out;
}

/// MLP over pair features; ReLU between layers, linear output.
inline const Matrix& pair_logits(const ModelParams& params, const Matrix& embeddings,
                                 std::span<const Edge> pairs, ForwardCache& cache) {
  detail::require(embeddings.cols() == params.arch.mlp_dims.front(),
                  "pair_logits: embedding width does not match the MLP input");
  const std::size_t layers = params.mlp.size();
  cache.pairs.assign(pairs.begin(), pairs.end());
  cache.mlp_input.resize(layers);
  cache.mlp_preact.resize(layers);
  cache.mlp_input[0] = pair_features(embeddings, pairs);
  for (std::size_t k = 0; k < layers; ++k) {
    Matrix pre = matmul(cache.mlp_input[k], params.mlp[k].weight);
    detail::add_bias(pre, params.mlp[k].bias);
    if (k + 1 < layers) {
      cache.mlp_input[k + 1] = detail::relu(pre);
      cache.mlp_preact[k] = std::move(pre);
    } else {
      cache.mlp_preact[k] = pre;
      cache.logits = std::move(pre);
    }
  }
  cache.head_ready = cache.encoder_ready && cache.params_stamp == params.stamp;
  return cache.logits;
}

/// Row-wise softmax with max subtraction.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto dst = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] - mx);
      z += dst[c];
    }
    for (double& v : dst) v /= z;
  }
  return out;
}

/// Mean negative log-likelihood of the labels under softmax(logits).
inline double cross_entropy(const Matrix& logits, std::span<const std::uint32_t> labels) {
  detail::require(logits.rows() > 0, "cross_entropy: empty batch");
  detail::require(labels.size() == logits.rows(), "cross_entropy: label count mismatch");
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    detail::require(labels[r] < logits.cols(), "cross_entropy: label out of range");
    auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    total += (mx + std::log(z)) - row[labels[r]];
  }
  return total / static_cast<double>(logits.rows());
}

/// Gradient of the mean cross-entropy with respect to every weight, given the
/// cache of the matching gcn_forward + pair_logits calls.
inline Gradients backward(const ForwardCache& cache, std::span<const std::uint32_t> labels,
                          const ModelParams& params, const NormalizedPropagator& prop) {
  if (!cache.encoder_ready || !cache.head_ready || cache.params_stamp != params.stamp ||
      cache.propagator_fingerprint != prop.source_fingerprint() ||
      cache.hidden.size() != params.gcn.size() + 1) {
    throw ContractError("backward: forward cache does not match these parameters/propagator");
  }
  const std::size_t batch = cache.logits.rows();
  detail::require(batch > 0, "backward: empty batch");
  detail::require(labels.size() == batch, "backward: label count mismatch");

  Gradients grads = zero_gradients(params);

  // d loss / d logits = (softmax - onehot) / B
  Matrix upstream = softmax_rows(cache.logits);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    detail::require(labels[r] < upstream.cols(), "backward: label out of range");
    upstream(r, labels[r]) -= 1.0;
    for (double& v : upstream.row(r)) v *= inv_batch;
  }

  for (std::size_t k = params.mlp.size(); k-- > 0;) {
    if (k + 1 < params.mlp.size()) detail::relu_backward(upstream, cache.mlp_preact[k]);
    grads.mlp[k].weight = matmul_tn(cache.mlp_input[k], upstream);
    detail::column_sums(upstream, grads.mlp[k].bias);
    upstream = matmul_nt(upstream, params.mlp[k].weight);
  }

  // Through z_d = |Z_m - Z_n|; the subgradient of |x| at 0 is taken as 0.
  const Matrix& z = cache.embeddings();
  Matrix grad_z(z.rows(), z.cols());
  for (std::size_t p = 0; p < batch; ++p) {
    const Edge& e = cache.pairs[p];
    auto zm = z.row(e.u);
    auto zn = z.row(e.v);
    auto g = upstream.row(p);
    double* gm = grad_z.row(e.u).data();
    double* gn = grad_z.row(e.v).data();
    for (std::size_t c = 0; c < z.cols(); ++c) {
      const double diff = zm[c] - zn[c];
      const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      gm[c] += s * g[c];
      gn[c] -= s * g[c];
    }
  }

  upstream = std::move(grad_z);
  for (std::size_t l = params.gcn.size(); l-- > 0;) {
    detail::relu_backward(upstream, cache.preact[l]);
    grads.gcn[l].weight = matmul_tn(cache.aggregated[l], upstream);
    detail::column_sums(upstream, grads.gcn[l].bias);
    if (l > 0) {
      // P is symmetric, so P^T * dA = P * dA.
      upstream = spmm(prop, matmul_nt(upstream, params.gcn[l].weight));
    }
  }
  return grads;
}

/// Convenience: forward through encoder and head, returning the mean loss.
inline double forward_loss(const ModelParams& params, const NormalizedPropagator& prop,
                           const Matrix& attributes, std::span<const Edge> pairs,
                           std::span<const std::uint32_t> labels, ForwardCache& cache) {
  const Matrix& z = gcn_forward(params, prop, attributes, cache);
  return cross_entropy(pair_logits(params, z, pairs, cache), labels);
}

}  // namespace hcm
