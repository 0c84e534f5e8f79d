#include "dndx/solver.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dndx {

void SolverConfig::validate() const {
  if (!(base_lr > 0.0)) throw std::invalid_argument("solver base_lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("solver momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("solver weight_decay must be >= 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("solver gamma must be >= 0");
  if (!(power >= 0.0)) throw std::invalid_argument("solver power must be >= 0");
  if (epochs < 1) throw std::invalid_argument("solver epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("solver batch_size must be >= 1");
}

LayerState::LayerState(Tensor w, Tensor b)
    : weights(std::move(w)),
      bias(std::move(b)),
      weight_velocity(weights.dims()),
      bias_velocity(bias.dims()) {}

double inv_lr(std::uint64_t iter, const SolverConfig& cfg) {
  return cfg.base_lr * std::pow(1.0 + cfg.gamma * static_cast<double>(iter), -cfg.power);
}

namespace {

void step(Tensor& w, Tensor& v, const Tensor& g, double lr, const SolverConfig& cfg) {
  if (g.dims() != w.dims()) throw ShapeMismatch("sgd_step: gradient " + g.dims().str() + " vs " + w.dims().str());
  const float momentum = static_cast<float>(cfg.momentum);
  const float decay = static_cast<float>(cfg.weight_decay);
  const float rate = static_cast<float>(lr);
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = momentum * v[i] - rate * (g[i] + decay * w[i]);
    w[i] += v[i];
  }
}

}  // namespace

void sgd_step(LayerState& state, const Tensor& dweights, const Tensor& dbias, double lr,
              const SolverConfig& cfg) {
  step(state.weights, state.weight_velocity, dweights, lr, cfg);
  step(state.bias, state.bias_velocity, dbias, lr, cfg);
}

Tensor init_weights(const InitScheme& scheme, Dims dims, int fan_in, int fan_out, Rng& rng) {
  if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("init_weights: fan_in and fan_out must be >= 1");
  Tensor w(dims);
  if (const auto* g = std::get_if<init::Gaussian>(&scheme)) {
    for (auto& v : w.values()) v = static_cast<float>(rng.normal(0.0, g->stddev));
  } else if (std::holds_alternative<init::UniformFanIn>(scheme)) {
    const double bound = std::sqrt(3.0 / fan_in);
    for (auto& v : w.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  } else {
    const double sigma = std::sqrt(2.0 / (fan_in + fan_out));
    for (auto& v : w.values()) v = static_cast<float>(rng.normal(0.0, sigma));
  }
  return w;
}

}  // namespace dndx
