#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "hcm/error.hpp"
#include "hcm/model.hpp"
#include "hcm/rng.hpp"

namespace hcm {

enum class OptimizerKind { sgld, sgd };

/// Optional polynomial decay eps_t = eps_0 * (t0 + t)^(-gamma). Off by default.
struct StepSchedule {
  bool enabled = false;
  double t0 = 1.0;
  double gamma = 0.55;

  double at(double base, std::uint64_t t) const {
    if (!enabled) return base;
    return base * std::pow(t0 + static_cast<double>(t), -gamma);
  }
};

struct OptimConfig {
  double step_size = 0.01;
  double weight_decay = 5e-8;
  OptimizerKind mode = OptimizerKind::sgld;
  StepSchedule schedule;
  /// Multiplies the Langevin noise. 1 in normal use; 0 turns SGLD into plain
  /// gradient descent with step eps/2 (used by equivalence tests).
  double noise_scale = 1.0;

  void validate() const {
    detail::require(step_size > 0.0, "step size must be positive");
    detail::require(weight_decay >= 0.0, "weight decay must be non-negative");
    detail::require(noise_scale >= 0.0, "noise scale must be non-negative");
  }
};

namespace detail {

inline void check_finite(const Gradients& g) {
  for (const auto* group : {&g.gcn, &g.mlp})
    for (const auto& layer : *group) {
      for (double v : layer.weight.values())
        if (!std::isfinite(v)) throw NumericError("non-finite gradient entry");
      for (double v : layer.bias)
        if (!std::isfinite(v)) throw NumericError("non-finite gradient entry");
    }
}

template <typename Update>
void apply_update(ModelParams& params, const Gradients& grads, Update&& update) {
  auto visit = [&](std::vector<DenseLayer>& layers, const std::vector<DenseLayer>& g) {
    detail::require(layers.size() == g.size(), "gradient/parameter layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& w = layers[l].weight.values();
      const auto& gw = g[l].weight.values();
      detail::require(w.size() == gw.size(), "gradient/parameter shape mismatch");
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = update(w[i], gw[i]);
      auto& b = layers[l].bias;
      detail::require(b.size() == g[l].bias.size(), "gradient/parameter shape mismatch");
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = update(b[i], g[l].bias[i]);
    }
  };
  visit(params.gcn, grads.gcn);
  visit(params.mlp, grads.mlp);
  params.touch();
}

}  // namespace detail

/// w <- w - [(eps/2)(g + lambda w) + eta], eta ~ N(0, eps) independently per scalar.
/// `step_size` overrides config.step_size (used with schedules).
inline void sgld_step(ModelParams& params, const Gradients& grads, const OptimConfig& config,
                      Rng& noise, double step_size) {
  detail::require(config.mode == OptimizerKind::sgld, "sgld_step called with a non-SGLD config");
  detail::check_finite(grads);
  const double half = step_size / 2.0;
  const double sigma = std::sqrt(step_size) * config.noise_scale;
  const double decay = config.weight_decay;
  if (config.noise_scale == 0.0) {
    detail::apply_update(params, grads, [&](double w, double g) {
      return w - (half * (g + decay * w) + 0.0);
    });
  } else {
    detail::apply_update(params, grads, [&](double w, double g) {
      return w - (half * (g + decay * w) + sigma * noise.normal());
    });
  }
}

inline void sgld_step(ModelParams& params, const Gradients& grads, const OptimConfig& config,
                      Rng& noise) {
  sgld_step(params, grads, config, noise, config.step_size);
}

/// w <- w - eps (g + lambda w).
inline void sgd_step(ModelParams& params, const Gradients& grads, const OptimConfig& config,
                     double step_size) {
  detail::require(config.mode == OptimizerKind::sgd, "sgd_step called with a non-SGD config");
  detail::check_finite(grads);
  const double decay = config.weight_decay;
  detail::apply_update(params, grads,
                       [&](double w, double g) { return w - step_size * (g + decay * w); });
}

inline void sgd_step(ModelParams& params, const Gradients& grads, const OptimConfig& config) {
  sgd_step(params, grads, config, config.step_size);
}

/// Dispatches on config.mode using the scheduled step size for iteration t.
inline void optimizer_step(ModelParams& params, const Gradients& grads, const OptimConfig& config,
                           Rng& noise, std::uint64_t t) {
  const double eps = config.schedule.at(config.step_size, t);
  if (config.mode == OptimizerKind::sgld)
    sgld_step(params, grads, config, noise, eps);
  else
    sgd_step(params, grads, config, eps);
}

}  // namespace hcm
